#include <gtest/gtest.h>

#include <sstream>

#include "lyanet/cli/commands.hpp"
#include "lyanet/cli/config.hpp"
#include "lyanet/error.hpp"

using namespace lyanet;
using namespace lyanet::cli;

namespace {

RunConfig parse(const std::string& text) {
  std::stringstream in(text);
  return parse_config(in);
}

std::size_t error_line(const std::string& text) {
  try {
    parse(text);
  } catch (const ParseError& e) {
    return e.line();
  }
  return 0;
}

}  // namespace

TEST(Config, EmptyFileGivesDefaults) {
  const auto c = parse("");
  EXPECT_EQ(c.train.trainer, train::TrainerKind::kMonteCarlo);
  EXPECT_EQ(c.train.kappa, 3.0);
  EXPECT_EQ(c.train.samples, 500u);
  EXPECT_EQ(c.train.iterations, 3000u);
  EXPECT_EQ(c.train.batch_size, 64u);
  EXPECT_EQ(c.train.learning_rate, 0.01);
  EXPECT_EQ(c.train.optimizer.kind, train::OptimizerKind::kAdam);
  EXPECT_EQ(c.hidden_widths, (std::vector<std::size_t>{64, 64}));
  EXPECT_FALSE(c.train.kappa_d.has_value());
}

TEST(Config, CommentsWhitespaceAndLists) {
  const auto c = parse(
      "# toy run\n"
      "\n"
      "  trainer =  path_integral \n"
      "kappa=2.5\n"
      "hidden_widths = 16, 8\n"
      "dataset = blobs\n"
      "blob_centers = -2,0; 2,0; 0,3\n"
      "kappa_d = 0.2\n"
      "sampler = ball\n");
  EXPECT_EQ(c.train.trainer, train::TrainerKind::kPathIntegral);
  EXPECT_EQ(c.train.kappa, 2.5);
  EXPECT_EQ(c.hidden_widths, (std::vector<std::size_t>{16, 8}));
  EXPECT_EQ(c.dataset, DatasetKind::kBlobs);
  ASSERT_EQ(c.blob_centers.size(), 3u);
  EXPECT_EQ(c.blob_centers[2], (std::vector<double>{0.0, 3.0}));
  EXPECT_EQ(*c.train.kappa_d, 0.2);
  EXPECT_EQ(*c.train.sampler, sampling::SamplerKind::kBall);
}

TEST(Config, ErrorsCarryLineNumbers) {
  EXPECT_EQ(error_line("kappa=3\nno_such_key=1\n"), 2u);
  EXPECT_EQ(error_line("kappa=3\n\nkappa=4\n"), 3u);
  EXPECT_EQ(error_line("iterations=many\n"), 1u);
  EXPECT_EQ(error_line("# c\njust a line\n"), 2u);
  EXPECT_EQ(error_line("trainer=nero\n"), 1u);
  EXPECT_THROW(parse("kappa=-1\n"), ParseError);
  EXPECT_THROW(parse("batch_size=0\n"), ParseError);
}

TEST(Config, EchoParsesBackToSameConfig) {
  const auto c = parse(
      "trainer=direct\nkappa=1.25\nsteps=8\nsolver=rk4\nseed=42\noptimizer=sgd\nhidden_widths=4\n"
      "dataset=blobs\nblob_centers=-1,2;3,-4\nattack_norm=l2\nattack_step_size=0.03\nportrait_bounds=-1,1\n");
  std::stringstream echo;
  write_config(echo, c);
  std::stringstream again;
  write_config(again, parse(echo.str()));
  EXPECT_EQ(echo.str(), again.str());
  const auto r = parse(echo.str());
  EXPECT_EQ(r.train.trainer, train::TrainerKind::kDirect);
  EXPECT_EQ(r.train.seed, 42u);
  EXPECT_EQ(r.blob_centers, c.blob_centers);
  EXPECT_EQ(*r.attack_step_size, 0.03);
}

TEST(Config, DatasetFromConfig) {
  auto c = parse("dataset_count=10\ndataset_seed=3\n");
  const auto d = make_dataset(c);
  EXPECT_EQ(d.size(), 10u);
  EXPECT_EQ(d.inputs, data::gen_circles(10, 1.0, 2.0, 0.1, 3).inputs);
  const auto sys = make_system(c, 2, 2);
  EXPECT_EQ(sys.dynamics().spec().widths, (std::vector<std::size_t>{5, 64, 64, 2}));
}

TEST(CurveSpec, ParsesAndRejects) {
  const auto t = parse_curve_spec("0.1:1:10");
  ASSERT_EQ(t.size(), 10u);
  EXPECT_DOUBLE_EQ(t.front(), 0.1);
  EXPECT_DOUBLE_EQ(t.back(), 1.0);
  EXPECT_ANY_THROW(parse_curve_spec("0:1:10"));
  EXPECT_ANY_THROW(parse_curve_spec("0.1:1"));
  EXPECT_ANY_THROW(parse_curve_spec("0.1:1:2.5"));
}

TEST(Checkpoint, SystemRoundTrip) {
  const auto sys = ode::OdeSystem::make_default(3, 4, {5}, nn::Activation::kRelu, 9, true);
  const auto back = system_from(make_checkpoint(sys, 2.0, 9, "direct"));
  EXPECT_EQ(back.dims().input, 3u);
  EXPECT_EQ(back.dims().classes, 4u);
  EXPECT_EQ(back.dynamics().flatten(), sys.dynamics().flatten());
  ASSERT_TRUE(back.phi().has_value());
  EXPECT_EQ(back.phi()->flatten(), sys.phi()->flatten());
}

TEST(Run, ExitCodes) {
  EXPECT_EQ(run(std::vector<std::string>{}), kExitUsage);
  EXPECT_EQ(run(std::vector<std::string>{"frobnicate"}), kExitUsage);
  EXPECT_EQ(run(std::vector<std::string>{"--help"}), kExitOk);
  EXPECT_EQ(run(std::vector<std::string>{"train", "/nonexistent/config.txt"}), kExitUsage);
  EXPECT_EQ(run(std::vector<std::string>{"eval", "/nonexistent/checkpoint.bin", "/nonexistent/data.csv"}), kExitUsage);
}
