#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "lyanet/data.hpp"
#include "lyanet/error.hpp"
#include "lyanet/lyapunov.hpp"
#include "lyanet/train.hpp"
#include "oracles.hpp"

using namespace lyanet;
using namespace lyanet::train;

namespace {

ode::OdeSystem small_system(std::uint64_t seed, bool learnable_phi = false) {
  return ode::OdeSystem::make_default(2, 2, {8}, nn::Activation::kTanh, seed, learnable_phi);
}

TrainConfig short_config(TrainerKind kind) {
  TrainConfig c;
  c.trainer = kind;
  c.iterations = 5;
  c.samples = 40;
  c.steps = 4;
  c.batch_size = 8;
  c.seed = 3;
  c.workers = 1;
  return c;
}

const data::LabeledDataset& circles() {
  static const auto d = data::gen_circles(64, 1.0, 2.0, 0.1, 5);
  return d;
}

void overwrite(ode::OdeSystem& sys, std::span<const double> p) { std::copy(p.begin(), p.end(), sys.dynamics().flat().begin()); }

}  // namespace

TEST(Optimizer, SgdStep) {
  const std::vector<double> p{1.0}, g{2.0};
  const auto u = optimizer_step({OptimizerKind::kSgd}, {}, p, g, 0.1);
  EXPECT_NEAR(u.params[0], 0.8, 1e-15);
}

TEST(Optimizer, AdamFirstStepHasMagnitudeAlpha) {
  const std::vector<double> p{1.0, -2.0, 0.5}, g{3.0, -0.01, 200.0};
  const auto u = optimizer_step({}, {}, p, g, 0.01);
  for (std::size_t i = 0; i < p.size(); ++i) EXPECT_NEAR(u.params[i] - p[i], -0.01 * std::copysign(1.0, g[i]), 1e-8);
  EXPECT_EQ(u.state.step, 1u);
  EXPECT_EQ(u.state.first_moment.size(), 3u);
}

TEST(Optimizer, ZeroGradientLeavesParameters) {
  const std::vector<double> p{1.0, -2.0}, g{0.0, 0.0};
  for (auto kind : {OptimizerKind::kSgd, OptimizerKind::kAdam}) {
    OptimizerConfig cfg;
    cfg.kind = kind;
    auto u = optimizer_step(cfg, {}, p, g, 0.1);
    u = optimizer_step(cfg, u.state, u.params, g, 0.1);
    EXPECT_EQ(u.params, p);
  }
}

TEST(Optimizer, PureAndShapeChecked) {
  const std::vector<double> p{1.0}, g{1.0};
  OptimizerState state;
  const auto a = optimizer_step({}, state, p, g, 0.1);
  const auto b = optimizer_step({}, state, p, g, 0.1);
  EXPECT_EQ(a.params, b.params);
  EXPECT_EQ(state.step, 0u);
  EXPECT_THROW(optimizer_step({}, {}, p, std::vector<double>{1.0, 2.0}, 0.1), ContractViolation);
}

TEST(Optimizer, AdamMatchesHandRecursion) {
  const std::vector<double> grads{0.5, -1.0, 2.0};
  std::vector<double> p{0.3};
  OptimizerState state;
  double m = 0, v = 0, theta = 0.3;
  for (std::size_t k = 0; k < grads.size(); ++k) {
    const auto u = optimizer_step({}, state, p, std::vector<double>{grads[k]}, 0.05);
    p = u.params;
    state = u.state;
    m = 0.9 * m + 0.1 * grads[k];
    v = 0.999 * v + 0.001 * grads[k] * grads[k];
    const double mh = m / (1 - std::pow(0.9, k + 1)), vh = v / (1 - std::pow(0.999, k + 1));
    theta -= 0.05 * mh / (std::sqrt(vh) + 1e-8);
    EXPECT_NEAR(p[0], theta, 1e-14);
  }
}

TEST(TrainConfig, Validation) {
  TrainConfig c;
  EXPECT_NO_THROW(c.validate());
  c.learning_rate = -1;
  EXPECT_THROW(c.validate(), ContractViolation);
  c = {};
  c.iterations = 0;
  EXPECT_THROW(c.validate(), ContractViolation);
  c = {};
  c.kappa_d = 1.5;
  EXPECT_THROW(c.validate(), ContractViolation);
  c = {};
  c.steps = 16;
  EXPECT_NEAR(c.resolved_kappa_d(), -std::expm1(-3.0 / 16), 1e-15);
}

TEST(Names, RoundTrip) {
  for (auto k : {TrainerKind::kMonteCarlo, TrainerKind::kPathIntegral, TrainerKind::kDirect})
    EXPECT_EQ(parse_trainer(to_string(k)), k);
  for (auto k : {OptimizerKind::kSgd, OptimizerKind::kAdam}) EXPECT_EQ(parse_optimizer(to_string(k)), k);
  EXPECT_THROW(parse_trainer("nero"), ContractViolation);
}

TEST(Trainers, ZeroLearningRateLeavesParameters) {
  for (auto kind : {TrainerKind::kMonteCarlo, TrainerKind::kPathIntegral, TrainerKind::kDirect}) {
    auto cfg = short_config(kind);
    cfg.learning_rate = 0.0;
    cfg.iterations = 1;
    const auto sys = small_system(1, kind == TrainerKind::kDirect);
    const auto report = train::train(cfg, circles(), sys);
    EXPECT_EQ(report.system.dynamics().flatten(), sys.dynamics().flatten()) << to_string(kind);
    if (sys.phi()) EXPECT_EQ(report.system.phi()->flatten(), sys.phi()->flatten());
    EXPECT_EQ(report.losses.size(), 1u);
  }
}

TEST(Trainers, SameSeedSameTrace) {
  for (auto kind : {TrainerKind::kMonteCarlo, TrainerKind::kPathIntegral, TrainerKind::kDirect}) {
    const auto cfg = short_config(kind);
    const auto a = train::train(cfg, circles(), small_system(2));
    auto cfg_parallel = cfg;
    cfg_parallel.workers = 3;
    const auto b = train::train(cfg_parallel, circles(), small_system(2));
    EXPECT_EQ(a.losses, b.losses) << to_string(kind);
    EXPECT_EQ(a.system.dynamics().flatten(), b.system.dynamics().flatten());
    EXPECT_EQ(a.losses.size(), cfg.iterations);
    for (double l : a.losses) EXPECT_TRUE(std::isfinite(l));
  }
}

TEST(Trainers, CheckpointHookCadence) {
  auto cfg = short_config(TrainerKind::kMonteCarlo);
  cfg.iterations = 7;
  cfg.checkpoint_every = 3;
  std::vector<std::size_t> calls;
  train::train(cfg, circles(), small_system(3), [&](std::size_t it, const ode::OdeSystem&) { calls.push_back(it); });
  EXPECT_EQ(calls, (std::vector<std::size_t>{3, 6, 7}));
}

TEST(Trainers, MonteCarloNeverSolvesTheOde) {
  auto cfg = short_config(TrainerKind::kMonteCarlo);
  cfg.iterations = 20;
  const auto before = ode::solver_invocations();
  const auto report = train_monte_carlo(cfg, circles(), small_system(4));
  EXPECT_EQ(ode::solver_invocations(), before);
  EXPECT_GT(report.sampler_radius, 0.0);
  train_path_integral(short_config(TrainerKind::kPathIntegral), circles(), small_system(4));
  EXPECT_GT(ode::solver_invocations(), before);
}

TEST(Trainers, PathIntegralFirstLossWithZeroOutputLayer) {
  auto sys = small_system(5);
  auto& dyn = sys.dynamics();
  const std::size_t last = dyn.spec().layer_count() - 1;
  for (double& w : dyn.weights(last)) w = 0.0;
  for (double& b : dyn.bias(last)) b = 0.0;
  auto cfg = short_config(TrainerKind::kPathIntegral);
  cfg.iterations = 1;
  const auto report = train_path_integral(cfg, circles(), sys);
  EXPECT_NEAR(report.losses[0], cfg.steps * cfg.resolved_kappa_d() * std::numbers::ln2, 1e-12);
}

TEST(Trainers, NonFiniteLossAborts) {
  auto sys = small_system(6);
  for (double& v : sys.dynamics().flat()) v = 1e308;
  auto cfg = short_config(TrainerKind::kDirect);
  try {
    train::train(cfg, circles(), sys);
    FAIL() << "expected TrainingAborted";
  } catch (const TrainingAborted& e) {
    EXPECT_EQ(e.iteration(), 1u);
  }
}

TEST(GradientFidelity, MonteCarlo) {
  const auto base = small_system(7);
  const auto batch = circles().subset({0, 1, 2, 3, 4, 5});
  Rng rng(1);
  const sampling::StateSampler sampler{sampling::SamplerKind::kHypercube, 1.4875, 2};
  const auto samples = lyapunov::draw_state_time(sampler, 30, batch.size(), rng);
  std::vector<double> grad;
  lyapunov::mc_loss(base, batch, samples, 3.0, 2, &grad);
  const auto fd = oracle::central_difference(
      [&](std::span<const double> p) {
        auto sys = base;
        overwrite(sys, p);
        return lyapunov::mc_loss(sys, batch, samples, 3.0).value;
      },
      base.dynamics().flatten(), 1e-6);
  EXPECT_LT(oracle::max_relative_error(grad, fd), 1e-4);
}

TEST(GradientFidelity, PathIntegral) {
  const auto base = small_system(8);
  const auto batch = circles().subset({3, 9, 12, 20});
  std::vector<double> grad;
  lyapunov::path_integral_batch(base, batch, 6, 0.3, ode::Solver::kRk4, 2, &grad);
  const auto fd = oracle::central_difference(
      [&](std::span<const double> p) {
        auto sys = base;
        overwrite(sys, p);
        return lyapunov::path_integral_batch(sys, batch, 6, 0.3, ode::Solver::kRk4).value;
      },
      base.dynamics().flatten(), 1e-6);
  EXPECT_LT(oracle::max_relative_error(grad, fd), 1e-4);
}

TEST(GradientFidelity, DirectIncludingPhi) {
  const auto base = small_system(9, true);
  const auto batch = circles().subset({1, 2, 30, 41});
  const auto loss = direct_loss(base, batch, 5, ode::Solver::kEuler, 2);
  const auto fd = oracle::central_difference(
      [&](std::span<const double> p) {
        auto sys = base;
        overwrite(sys, p);
        return direct_loss(sys, batch, 5, ode::Solver::kEuler, 1, false).value;
      },
      base.dynamics().flatten(), 1e-6);
  EXPECT_LT(oracle::max_relative_error(loss.dynamics_gradient, fd), 1e-4);
  const auto fd_phi = oracle::central_difference(
      [&](std::span<const double> p) {
        auto sys = base;
        std::copy(p.begin(), p.end(), sys.phi()->flat().begin());
        return direct_loss(sys, batch, 5, ode::Solver::kEuler, 1, false).value;
      },
      base.phi()->flatten(), 1e-6);
  EXPECT_LT(oracle::max_relative_error(loss.phi_gradient, fd_phi), 1e-4);
}

TEST(DirectLoss, MatchesMeanEndpointCrossEntropy) {
  const auto sys = small_system(10);
  const auto batch = circles().subset({0, 1, 2});
  double expected = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i)
    expected += oracle::cross_entropy(ode::euler_solve(sys, batch.inputs[i], 5).final_state(), batch.labels[i]) / 3.0;
  EXPECT_NEAR(direct_loss(sys, batch, 5, ode::Solver::kEuler, 1, false).value, expected, 1e-13);
}

TEST(MonteCarloSurrogate, UniformEstimateBoundsTrajectoryLoss) {
  const double kappa = 3.0;
  const auto batch = circles();
  for (std::uint64_t seed : {11u, 12u, 13u}) {
    auto sys = small_system(seed);
    for (double& v : sys.dynamics().flat()) v *= 0.3;
    const double s = sampling::hypercube_halfwidth(sys.psi(), kappa, 2);
    Rng rng(seed);
    double trajectory_mean = 0.0;
    const std::size_t draws = 2000;
    for (std::size_t j = 0; j < draws; ++j) {
      const std::size_t i = j % batch.size();
      const double t = sampling::sample_time(rng);
      const auto eta = ode::state_at(ode::as_field(sys), sys.initial_state(batch.inputs[i]), batch.inputs[i], t,
                                     ode::Solver::kRk4, 32);
      ASSERT_LE(std::max(std::abs(eta[0]), std::abs(eta[1])), s) << "trajectory left the hypercube";
      trajectory_mean += lyapunov::pointwise_loss(sys, batch.inputs[i], batch.labels[i], eta, t, kappa) / draws;
    }
    const sampling::StateSampler sampler{sampling::SamplerKind::kHypercube, s, 2};
    const auto uniform = lyapunov::mc_loss_estimate(sys, batch, sampler, draws, kappa, rng);
    EXPECT_LE(trajectory_mean, uniform.value + 3.0 * uniform.standard_error) << "seed " << seed;
  }
}

TEST(TrainCsv, HeaderAndOneBasedRows) {
  const auto report = train::train(short_config(TrainerKind::kMonteCarlo), circles(), small_system(14));
  std::stringstream out;
  write_train_csv(out, report);
  std::string line;
  std::getline(out, line);
  EXPECT_EQ(line, "iteration,loss,wall_ms");
  std::getline(out, line);
  EXPECT_EQ(line.substr(0, 2), "1,");
  std::size_t rows = 1;
  while (std::getline(out, line)) ++rows;
  EXPECT_EQ(rows, report.losses.size());
}
