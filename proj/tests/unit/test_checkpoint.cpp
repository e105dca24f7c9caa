#include <gtest/gtest.h>

#include <sstream>

#include "lyanet/checkpoint.hpp"
#include "lyanet/error.hpp"
#include "lyanet/rng.hpp"

using namespace lyanet;
using namespace lyanet::nn;

namespace {

Checkpoint sample_checkpoint(bool with_phi, bool affine_psi) {
  auto dyn = mlp_init(MlpSpec::make({5, 8, 2}, Activation::kTanh, 3));
  Rng rng(1);
  for (double& v : dyn.flat()) v = rng.normal();
  std::optional<ParamVector> phi;
  if (with_phi) phi = mlp_init(MlpSpec::make({2, 2}, Activation::kRelu, 4));
  auto psi = affine_psi ? OutputMap::affine(2, 2, {1.0, 0.5, -0.5, 2.0}, {0.1, 0.2}) : OutputMap::identity(2);
  return Checkpoint{2, 2, 2, 3.0, 42, "monte_carlo", std::move(dyn), std::move(phi), std::move(psi)};
}

}  // namespace

TEST(Checkpoint, RoundTripIsExact) {
  for (bool phi : {false, true}) {
    for (bool affine : {false, true}) {
      const auto c = sample_checkpoint(phi, affine);
      std::stringstream buf;
      write_checkpoint(buf, c);
      const auto r = read_checkpoint(buf);
      EXPECT_EQ(r.input_dim, c.input_dim);
      EXPECT_EQ(r.state_dim, c.state_dim);
      EXPECT_EQ(r.classes, c.classes);
      EXPECT_EQ(r.kappa, c.kappa);
      EXPECT_EQ(r.seed, c.seed);
      EXPECT_EQ(r.trainer, c.trainer);
      EXPECT_EQ(r.dynamics.flatten(), c.dynamics.flatten());
      EXPECT_EQ(r.dynamics.spec().widths, c.dynamics.spec().widths);
      EXPECT_EQ(r.dynamics.spec().activations, c.dynamics.spec().activations);
      EXPECT_EQ(r.phi.has_value(), phi);
      if (phi) EXPECT_EQ(r.phi->flatten(), c.phi->flatten());
      EXPECT_EQ(r.psi.is_identity(), !affine);
      if (affine) {
        EXPECT_EQ(std::vector<double>(r.psi.weights().begin(), r.psi.weights().end()),
                  std::vector<double>(c.psi.weights().begin(), c.psi.weights().end()));
      }
    }
  }
}

TEST(Checkpoint, StartsWithMagicAndLittleEndianVersion) {
  std::stringstream buf;
  write_checkpoint(buf, sample_checkpoint(false, false));
  const std::string bytes = buf.str();
  EXPECT_EQ(bytes.substr(0, 8), "LYANETCK");
  EXPECT_EQ(static_cast<unsigned char>(bytes[8]), kCheckpointVersion);
  EXPECT_EQ(bytes[9], 0);
}

TEST(Checkpoint, RejectsBadMagicVersionAndTruncation) {
  std::stringstream buf;
  write_checkpoint(buf, sample_checkpoint(true, true));
  const std::string good = buf.str();

  std::string bad_magic = good;
  bad_magic[0] = 'X';
  std::stringstream a(bad_magic);
  EXPECT_THROW(read_checkpoint(a), ParseError);

  std::string bad_version = good;
  bad_version[8] = 9;
  std::stringstream b(bad_version);
  EXPECT_THROW(read_checkpoint(b), ParseError);

  for (std::size_t cut : {4ul, 20ul, good.size() / 2, good.size() - 1}) {
    std::stringstream c(good.substr(0, cut));
    EXPECT_THROW(read_checkpoint(c), ParseError) << "cut at " << cut;
  }
}

TEST(Checkpoint, MissingFileIsParseError) {
  EXPECT_THROW(load_checkpoint("/nonexistent/dir/checkpoint.bin"), ParseError);
}
