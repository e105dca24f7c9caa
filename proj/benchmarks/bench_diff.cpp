#include <benchmark/benchmark.h>

#include "lyanet/nn.hpp"
#include "lyanet/ode.hpp"
#include "lyanet/potential.hpp"

using namespace lyanet;

namespace {

nn::ParamVector net(std::size_t width) {
  return nn::mlp_init(nn::MlpSpec::make({5, width, width, 2}, nn::Activation::kTanh, 1));
}

void BM_MlpForward(benchmark::State& state) {
  const auto p = net(static_cast<std::size_t>(state.range(0)));
  const std::vector<double> in{0.1, -0.2, 0.3, 0.4, 0.5};
  for (auto _ : state) benchmark::DoNotOptimize(nn::mlp_forward(p, in));
}
BENCHMARK(BM_MlpForward)->Arg(16)->Arg(64)->Arg(256);

void BM_MlpParameterGradient(benchmark::State& state) {
  const auto p = net(static_cast<std::size_t>(state.range(0)));
  const std::vector<double> in{0.1, -0.2, 0.3, 0.4, 0.5};
  std::vector<double> grad(p.size());
  for (auto _ : state) {
    diff::Graph g;
    const auto binding = nn::MlpBinding::trainable(g, p, 0);
    const auto root = g.sum(g.tanh(binding.forward(g, g.constant(in))));
    g.backward(root, [&](diff::LeafId leaf, std::span<const double> adj) { binding.accumulate(leaf, adj, grad); });
    benchmark::DoNotOptimize(grad.data());
  }
}
BENCHMARK(BM_MlpParameterGradient)->Arg(16)->Arg(64)->Arg(256);

// Backprop through a full rollout, the inner loop of the rollout trainers.
void BM_RolloutGradient(benchmark::State& state) {
  const auto sys = ode::OdeSystem::make_default(2, 2, {64, 64}, nn::Activation::kTanh, 3);
  const auto solver = state.range(1) == 0 ? ode::Solver::kEuler : ode::Solver::kRk4;
  const std::vector<double> x{0.5, -1.0};
  const potential::CrossEntropyPotential v(sys.psi(), 0);
  std::vector<double> grad(sys.dynamics().size());
  for (auto _ : state) {
    diff::Graph g;
    const auto binding = nn::MlpBinding::trainable(g, sys.dynamics(), 0);
    const auto states = ode::rollout(g, binding, g.constant(sys.initial_state(x)), g.constant(x), solver,
                                     static_cast<std::size_t>(state.range(0)));
    g.backward(v.node(g, states.back()),
               [&](diff::LeafId leaf, std::span<const double> adj) { binding.accumulate(leaf, adj, grad); });
    benchmark::DoNotOptimize(grad.data());
  }
}
BENCHMARK(BM_RolloutGradient)->Args({16, 0})->Args({16, 1})->Args({64, 0});

}  // namespace

BENCHMARK_MAIN();
