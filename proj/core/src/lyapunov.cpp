#include "lyanet/lyapunov.hpp"

#include <algorithm>
#include <cmath>

#include "chunked.hpp"
#include "lyanet/error.hpp"

namespace lyanet::lyapunov {
namespace {

potential::CrossEntropyPotential training_potential(const ode::OdeSystem& system, std::size_t label) {
  return potential::CrossEntropyPotential(system.psi(), label, 0.0);
}

LossEstimate summarize(std::span<const double> values, bool with_error) {
  LossEstimate out;
  out.samples = values.size();
  if (values.empty()) return out;
  double sum = 0.0;
  for (double v : values) sum += v;
  const double n = static_cast<double>(values.size());
  out.value = sum / n;
  if (with_error && values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - out.value) * (v - out.value);
    out.standard_error = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
  }
  return out;
}

}  // namespace

double default_discrete_rate(double kappa, std::size_t steps) {
  if (!(kappa > 0.0) || steps < 1) throw ContractViolation("default_discrete_rate: need kappa > 0 and steps >= 1");
  return -std::expm1(-kappa / static_cast<double>(steps));
}

LyapunovConfig LyapunovConfig::make(double kappa, std::size_t steps) {
  LyapunovConfig c{kappa, default_discrete_rate(kappa, steps), steps};
  c.validate();
  return c;
}

void LyapunovConfig::validate() const {
  if (!(kappa > 0.0)) throw ContractViolation("LyapunovConfig: kappa must be positive");
  if (!(kappa_d > 0.0 && kappa_d < 1.0)) throw ContractViolation("LyapunovConfig: kappa_d must lie in (0, 1)");
  if (steps < 1) throw ContractViolation("LyapunovConfig: steps must be at least 1");
}

double pointwise_loss(const potential::Potential& potential, std::span<const double> eta,
                      std::span<const double> field_value, double kappa) {
  if (eta.size() != potential.dim() || field_value.size() != potential.dim()) {
    throw ContractViolation("pointwise_loss: state and field must match the potential's dimension");
  }
  const auto g = potential.gradient(eta);
  double flow = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) flow += g[i] * field_value[i];
  return std::max(0.0, flow + kappa * potential.value(eta));
}

double pointwise_loss(const ode::OdeSystem& system, std::span<const double> x, std::size_t label,
                      std::span<const double> eta, double t, double kappa) {
  return pointwise_loss(training_potential(system, label), eta, system.field(eta, x, t), kappa);
}

diff::NodeId pointwise_node(diff::Graph& graph, const nn::MlpBinding& dynamics,
                            const potential::Potential& potential, std::span<const double> eta,
                            std::span<const double> x, double t, double kappa) {
  const auto g = potential.gradient(eta);
  const double decay = kappa * potential.value(eta);
  const auto in = graph.concat({graph.constant(eta), graph.constant(x), graph.constant(t)});
  const auto f = dynamics.forward(graph, in);
  return graph.relu(graph.add(graph.dot(graph.constant(g), f), graph.constant(decay)));
}

std::vector<StateTimeSample> draw_state_time(const sampling::StateSampler& sampler, std::size_t count,
                                             std::size_t batch_size, Rng& rng) {
  if (batch_size < 1) throw ContractViolation("draw_state_time: batch must be non-empty");
  std::vector<StateTimeSample> out(count);
  for (std::size_t j = 0; j < count; ++j) {
    out[j].eta = sampler.sample(rng);
    out[j].t = sampling::sample_time(rng);
    out[j].example = j % batch_size;
  }
  return out;
}

LossEstimate mc_loss(const ode::OdeSystem& system, const data::LabeledDataset& batch,
                     std::span<const StateTimeSample> samples, double kappa, std::size_t workers,
                     std::vector<double>* gradient) {
  if (samples.empty()) throw ContractViolation("mc_loss: need at least one sample");
  if (batch.empty()) throw ContractViolation("mc_loss: empty batch");
  for (const auto& s : samples) {
    if (s.eta.size() != system.dims().state) throw ContractViolation("mc_loss: sampler dimension mismatch");
    if (s.example >= batch.size()) throw ContractViolation("mc_loss: sample refers past the batch");
  }
  std::vector<potential::CrossEntropyPotential> potentials;
  potentials.reserve(system.dims().classes);
  for (std::size_t c = 0; c < system.dims().classes; ++c) potentials.push_back(training_potential(system, c));

  const nn::ParamVector* nets[] = {&system.dynamics()};
  auto result = detail::evaluate_chunked(
      nets, samples.size(), workers, gradient != nullptr,
      [&](diff::Graph& graph, std::span<const nn::MlpBinding> bindings, std::size_t i) {
        const auto& s = samples[i];
        return pointwise_node(graph, bindings[0], potentials[batch.labels[s.example]], s.eta,
                              batch.inputs[s.example], s.t, kappa);
      });
  const auto estimate = summarize(result.values, true);
  if (gradient) {
    *gradient = std::move(result.gradients[0]);
    const double inv = 1.0 / static_cast<double>(samples.size());
    for (double& g : *gradient) g *= inv;
  }
  return estimate;
}

LossEstimate mc_loss_estimate(const ode::OdeSystem& system, const data::LabeledDataset& batch,
                              const sampling::StateSampler& sampler, std::size_t count, double kappa, Rng& rng,
                              std::size_t workers) {
  if (sampler.dim != system.dims().state) throw ContractViolation("mc_loss_estimate: sampler dimension mismatch");
  const auto samples = draw_state_time(sampler, count, batch.size(), rng);
  return mc_loss(system, batch, samples, kappa, workers);
}

double discrete_term(double v_now, double v_prev, double kappa_d) {
  return std::max(0.0, v_now + (kappa_d - 1.0) * v_prev);
}

double path_integral_loss(const ode::OdeSystem& system, std::span<const double> x, std::size_t label,
                          std::size_t steps, double kappa_d, ode::Solver solver) {
  const auto pot = training_potential(system, label);
  const auto traj = ode::solve(system, x, solver, steps);
  double total = 0.0;
  double prev = pot.value(traj.states[0]);
  for (std::size_t j = 1; j < traj.size(); ++j) {
    const double now = pot.value(traj.states[j]);
    total += discrete_term(now, prev, kappa_d);
    prev = now;
  }
  return total;
}

diff::NodeId path_integral_node(diff::Graph& graph, const nn::MlpBinding& dynamics, const ode::OdeSystem& system,
                                std::span<const double> x, std::size_t label, std::size_t steps, double kappa_d,
                                ode::Solver solver) {
  const auto pot = training_potential(system, label);
  const auto x_node = graph.constant(x);
  const auto eta0 = graph.constant(system.initial_state(x));
  const auto states = ode::rollout(graph, dynamics, eta0, x_node, solver, steps);
  diff::NodeId prev = pot.node(graph, states[0]);
  diff::NodeId total = 0;
  for (std::size_t j = 1; j < states.size(); ++j) {
    const diff::NodeId now = pot.node(graph, states[j]);
    const auto term = graph.relu(graph.add(now, graph.scale(prev, kappa_d - 1.0)));
    total = j == 1 ? term : graph.add(total, term);
    prev = now;
  }
  return total;
}

LossEstimate path_integral_batch(const ode::OdeSystem& system, const data::LabeledDataset& batch,
                                 std::size_t steps, double kappa_d, ode::Solver solver, std::size_t workers,
                                 std::vector<double>* gradient) {
  if (batch.empty()) throw ContractViolation("path_integral_batch: empty batch");
  const nn::ParamVector* nets[] = {&system.dynamics()};
  auto result = detail::evaluate_chunked(
      nets, batch.size(), workers, gradient != nullptr,
      [&](diff::Graph& graph, std::span<const nn::MlpBinding> bindings, std::size_t i) {
        return path_integral_node(graph, bindings[0], system, batch.inputs[i], batch.labels[i], steps, kappa_d,
                                  solver);
      });
  auto estimate = summarize(result.values, false);
  if (gradient) {
    *gradient = std::move(result.gradients[0]);
    const double inv = 1.0 / static_cast<double>(batch.size());
    for (double& g : *gradient) g *= inv;
  }
  return estimate;
}

}  // namespace lyanet::lyapunov
