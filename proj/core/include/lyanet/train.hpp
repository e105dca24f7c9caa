#pragma once

// Trainers for the dynamics network:
//
//   monte_carlo    pointwise Lyapunov loss at sampled (state, time) pairs; no
//                  ODE solve anywhere in the loop
//   path_integral  discrete Lyapunov terms along a differentiable rollout
//   direct         cross entropy at t = 1 through the unrolled solver
//
// psi is never trained. A learnable phi is trained only by `direct`.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lyanet/data.hpp"
#include "lyanet/ode.hpp"
#include "lyanet/sampling.hpp"

namespace lyanet::train {

enum class TrainerKind : std::uint8_t { kMonteCarlo, kPathIntegral, kDirect };

const char* to_string(TrainerKind kind);
/// "monte_carlo", "path_integral" or "direct".
TrainerKind parse_trainer(const std::string& name);

enum class OptimizerKind : std::uint8_t { kSgd, kAdam };

const char* to_string(OptimizerKind kind);
/// "sgd" or "adam".
OptimizerKind parse_optimizer(const std::string& name);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::kAdam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct OptimizerState {
  std::size_t step = 0;
  std::vector<double> first_moment;
  std::vector<double> second_moment;
};

struct OptimizerUpdate {
  std::vector<double> params;
  OptimizerState state;
};

/// One SGD or Adam step. A fresh state (step 0, empty moments) is sized on
/// first use. Throws ContractViolation on mismatched lengths.
OptimizerUpdate optimizer_step(const OptimizerConfig& config, const OptimizerState& state,
                               std::span<const double> params, std::span<const double> grads, double learning_rate);

struct TrainConfig {
  TrainerKind trainer = TrainerKind::kMonteCarlo;
  double kappa = 3.0;
  /// Per-step contraction rate; 1 - e^{-kappa/steps} when absent.
  std::optional<double> kappa_d;
  /// Monte Carlo (state, time) draws per iteration.
  std::size_t samples = 500;
  /// Rollout steps for path_integral and direct.
  std::size_t steps = 16;
  ode::Solver solver = ode::Solver::kEuler;
  double learning_rate = 0.01;
  std::size_t iterations = 3000;
  std::size_t batch_size = 64;
  std::uint64_t seed = 0;
  OptimizerConfig optimizer;
  /// Hypercube up to 16 state dimensions, ball above, when absent.
  std::optional<sampling::SamplerKind> sampler;
  /// 0 = all cores. Results do not depend on it.
  std::size_t workers = 0;
  std::size_t checkpoint_every = 500;

  /// Throws ContractViolation unless learning_rate >= 0, iterations >= 1,
  /// batch_size >= 1, samples >= 1, steps >= 1, kappa > 0 and kappa_d, if
  /// given, lies in (0, 1).
  void validate() const;
  double resolved_kappa_d() const;
};

struct TrainReport {
  /// Loss of each iteration, evaluated before its parameter update.
  std::vector<double> losses;
  std::vector<double> wall_ms;
  ode::OdeSystem system;
  std::uint64_t seed = 0;
  TrainConfig config;
  /// Monte Carlo only: the hypercube half-width or ball radius used.
  double sampler_radius = 0.0;
};

/// Called with (iterations completed, current system) every
/// checkpoint_every iterations and once at exit.
using CheckpointHook = std::function<void(std::size_t, const ode::OdeSystem&)>;

/// All trainers throw TrainingAborted (with the iteration index) on a
/// non-finite loss or gradient, or a diverging rollout. InfeasibleRadius
/// from the sampler setup propagates unchanged.
TrainReport train_monte_carlo(const TrainConfig& config, const data::LabeledDataset& dataset, ode::OdeSystem system,
                              const CheckpointHook& hook = {});
TrainReport train_path_integral(const TrainConfig& config, const data::LabeledDataset& dataset,
                                ode::OdeSystem system, const CheckpointHook& hook = {});
TrainReport train_direct(const TrainConfig& config, const data::LabeledDataset& dataset, ode::OdeSystem system,
                         const CheckpointHook& hook = {});
/// Dispatches on config.trainer.
TrainReport train(const TrainConfig& config, const data::LabeledDataset& dataset, ode::OdeSystem system,
                  const CheckpointHook& hook = {});

/// Mean cross entropy at t = 1 over `batch` through the unrolled solver,
/// with gradients for the dynamics and (if present) phi.
struct DirectLoss {
  double value = 0.0;
  std::vector<double> dynamics_gradient;
  std::vector<double> phi_gradient;
};
DirectLoss direct_loss(const ode::OdeSystem& system, const data::LabeledDataset& batch, std::size_t steps,
                       ode::Solver solver, std::size_t workers = 1, bool want_gradient = true);

/// Header `iteration,loss,wall_ms`; iterations are 1-based.
void write_train_csv(std::ostream& out, const TrainReport& report);

}  // namespace lyanet::train
