#include <gtest/gtest.h>

#include "lyanet/data.hpp"
#include "lyanet/eval.hpp"
#include "lyanet/train.hpp"

using namespace lyanet;

namespace {

train::TrainConfig config(train::TrainerKind kind, std::size_t iterations) {
  train::TrainConfig c;
  c.trainer = kind;
  c.kappa = 3.0;
  c.samples = 500;
  c.steps = 16;
  c.iterations = iterations;
  c.seed = 7;
  return c;
}

ode::OdeSystem fresh(std::size_t n, std::size_t m) {
  return ode::OdeSystem::make_default(n, m, {64, 64}, nn::Activation::kTanh, 7);
}

double train_accuracy(const ode::OdeSystem& system, const data::LabeledDataset& d) {
  return eval::accuracy(system, d, 1.0, ode::Solver::kRk4, 32).accuracy;
}

const data::LabeledDataset& circles() {
  static const auto d = data::gen_circles(1000, 1.0, 2.0, 0.1, 7);
  return d;
}

}  // namespace

TEST(TrainingRuns, MonteCarloLossFallsBelowTenPercent) {
  const auto report = train::train(config(train::TrainerKind::kMonteCarlo, 3000), circles(), fresh(2, 2));
  ASSERT_EQ(report.losses.size(), 3000u);
  EXPECT_LT(report.losses.back(), 0.1 * report.losses.front());
}

TEST(TrainingRuns, PathIntegralLossFallsBelowTenPercent) {
  const auto report = train::train(config(train::TrainerKind::kPathIntegral, 3000), circles(), fresh(2, 2));
  EXPECT_LT(report.losses.back(), 0.1 * report.losses.front());
}

TEST(TrainingRuns, DirectBaselineFitsCircles) {
  const auto report = train::train(config(train::TrainerKind::kDirect, 3000), circles(), fresh(2, 2));
  EXPECT_GE(train_accuracy(report.system, circles()), 0.95);
}

TEST(TrainingRuns, DirectBaselineFitsSeparableBlobs) {
  const auto blobs = data::gen_blobs(1000, {{-1.5, -1.5}, {1.5, 1.5}}, 0.5, 7);
  const auto report = train::train(config(train::TrainerKind::kDirect, 2000), blobs, fresh(2, 2));
  EXPECT_GE(train_accuracy(report.system, blobs), 0.99);
}
