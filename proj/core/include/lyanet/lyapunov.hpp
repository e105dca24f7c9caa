#pragma once

// Lyapunov losses: how far a vector field is from contracting the classifier
// potential at an exponential rate.
//
//   pointwise:  max{0, <dV/deta, f(eta, x, t)> + kappa * V(eta)}
//   discrete:   max{0, V_now + (kappa_d - 1) * V_prev}
//
// The Monte Carlo objective averages the pointwise loss over states and
// times drawn independently of any trajectory. The path-integral objective
// sums the discrete term over a rolled-out trajectory.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "lyanet/data.hpp"
#include "lyanet/ode.hpp"
#include "lyanet/potential.hpp"
#include "lyanet/rng.hpp"
#include "lyanet/sampling.hpp"

namespace lyanet::lyapunov {

/// 1 - e^{-kappa/steps}: `steps` discrete contractions compose to e^{-kappa}.
double default_discrete_rate(double kappa, std::size_t steps);

struct LyapunovConfig {
  double kappa = 3.0;
  double kappa_d = 0.0;
  /// Sample count (Monte Carlo) or step count (path integral).
  std::size_t steps = 16;

  /// kappa_d from default_discrete_rate.
  static LyapunovConfig make(double kappa, std::size_t steps);
  /// Throws ContractViolation unless kappa > 0, 0 < kappa_d < 1, steps >= 1.
  void validate() const;
};

struct LossEstimate {
  double value = 0.0;
  std::size_t samples = 0;
  /// Sample std / sqrt(samples); zero outside Monte Carlo mode.
  double standard_error = 0.0;
};

double pointwise_loss(const potential::Potential& potential, std::span<const double> eta,
                      std::span<const double> field_value, double kappa);

/// Classifier form: V is the cross entropy of psi with no truncation.
double pointwise_loss(const ode::OdeSystem& system, std::span<const double> x, std::size_t label,
                      std::span<const double> eta, double t, double kappa);

/// Graph form, differentiable in the dynamics parameters bound by
/// `dynamics`. dV/deta and V enter as constants: psi is frozen, so they do
/// not depend on the parameters.
diff::NodeId pointwise_node(diff::Graph& graph, const nn::MlpBinding& dynamics,
                            const potential::Potential& potential, std::span<const double> eta,
                            std::span<const double> x, double t, double kappa);

struct StateTimeSample {
  std::vector<double> eta;
  double t = 0.0;
  /// Index into the minibatch.
  std::size_t example = 0;
};

/// `count` independent (eta, t) draws; draw j is scored against minibatch
/// example j mod batch_size.
std::vector<StateTimeSample> draw_state_time(const sampling::StateSampler& sampler, std::size_t count,
                                             std::size_t batch_size, Rng& rng);

/// Mean pointwise loss over `samples`, scored against `batch`. Writes the
/// gradient of that mean with respect to the dynamics parameters into
/// `gradient` when it is non-null.
LossEstimate mc_loss(const ode::OdeSystem& system, const data::LabeledDataset& batch,
                     std::span<const StateTimeSample> samples, double kappa, std::size_t workers = 1,
                     std::vector<double>* gradient = nullptr);

/// Draws `count` samples from `sampler` and evaluates mc_loss.
LossEstimate mc_loss_estimate(const ode::OdeSystem& system, const data::LabeledDataset& batch,
                              const sampling::StateSampler& sampler, std::size_t count, double kappa, Rng& rng,
                              std::size_t workers = 1);

double discrete_term(double v_now, double v_prev, double kappa_d);

/// Sum of discrete terms over the plain solver trajectory of one example.
double path_integral_loss(const ode::OdeSystem& system, std::span<const double> x, std::size_t label,
                          std::size_t steps, double kappa_d, ode::Solver solver);

/// Same quantity on a graph, differentiable through every solver step.
diff::NodeId path_integral_node(diff::Graph& graph, const nn::MlpBinding& dynamics, const ode::OdeSystem& system,
                                std::span<const double> x, std::size_t label, std::size_t steps, double kappa_d,
                                ode::Solver solver);

/// Mean path-integral loss over `batch`, with the gradient of that mean with
/// respect to the dynamics parameters when `gradient` is non-null.
LossEstimate path_integral_batch(const ode::OdeSystem& system, const data::LabeledDataset& batch,
                                 std::size_t steps, double kappa_d, ode::Solver solver, std::size_t workers = 1,
                                 std::vector<double>* gradient = nullptr);

}  // namespace lyanet::lyapunov
