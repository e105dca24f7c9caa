#include <benchmark/benchmark.h>

#include "lyanet/data.hpp"
#include "lyanet/train.hpp"

using namespace lyanet;

namespace {

// Wall time of a short run per trainer on the two-ring set. Monte Carlo
// iterations skip the solver entirely, so they should be the cheapest.
void BM_TrainIterations(benchmark::State& state) {
  static const auto dataset = data::gen_circles(1000, 1.0, 2.0, 0.1, 7);
  train::TrainConfig config;
  config.trainer = static_cast<train::TrainerKind>(state.range(0));
  config.iterations = 20;
  config.seed = 7;
  for (auto _ : state) {
    auto system = ode::OdeSystem::make_default(2, 2, {64, 64}, nn::Activation::kTanh, 7);
    benchmark::DoNotOptimize(train::train(config, dataset, std::move(system)).losses.back());
  }
  state.SetLabel(train::to_string(config.trainer));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(config.iterations));
}
BENCHMARK(BM_TrainIterations)
    ->Arg(static_cast<int>(train::TrainerKind::kMonteCarlo))
    ->Arg(static_cast<int>(train::TrainerKind::kPathIntegral))
    ->Arg(static_cast<int>(train::TrainerKind::kDirect))
    ->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
