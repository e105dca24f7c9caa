#include "lyanet/train.hpp"

#include <chrono>
#include <cmath>
#include <ostream>

#include "chunked.hpp"
#include "lyanet/error.hpp"
#include "lyanet/lyapunov.hpp"
#include "lyanet/potential.hpp"

namespace lyanet::train {
namespace {

using Clock = std::chrono::steady_clock;

data::LabeledDataset draw_minibatch(const data::LabeledDataset& dataset, std::size_t batch_size, Rng& rng) {
  std::vector<std::size_t> indices(batch_size);
  for (auto& i : indices) i = static_cast<std::size_t>(rng.below(dataset.size()));
  return dataset.subset(indices);
}

bool all_finite(std::span<const double> values) {
  for (double v : values) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void check_inputs(const TrainConfig& config, const data::LabeledDataset& dataset, const ode::OdeSystem& system) {
  config.validate();
  dataset.validate();
  if (dataset.empty()) throw ContractViolation("train: empty dataset");
  if (dataset.input_dim != system.dims().input) throw ContractViolation("train: dataset input dimension mismatch");
  if (dataset.classes > system.dims().classes) throw ContractViolation("train: dataset has more classes than the model");
}

// Shared iteration loop. `step` returns the loss of the iteration and applies
// the update; exceptions from it are rethrown as TrainingAborted.
template <typename Step>
TrainReport run_loop(const TrainConfig& config, ode::OdeSystem system, const CheckpointHook& hook, Step&& step) {
  TrainReport report{{}, {}, std::move(system), config.seed, config, 0.0};
  report.losses.reserve(config.iterations);
  report.wall_ms.reserve(config.iterations);
  for (std::size_t it = 1; it <= config.iterations; ++it) {
    const auto start = Clock::now();
    double loss = 0.0;
    try {
      loss = step(report.system, it);
    } catch (const DivergenceError& e) {
      throw TrainingAborted(std::string("training aborted: ") + e.what(), it);
    } catch (const NumericFault& e) {
      throw TrainingAborted(std::string("training aborted: ") + e.what(), it);
    }
    report.losses.push_back(loss);
    report.wall_ms.push_back(std::chrono::duration<double, std::milli>(Clock::now() - start).count());
    if (hook && config.checkpoint_every > 0 && it % config.checkpoint_every == 0 && it != config.iterations) {
      hook(it, report.system);
    }
  }
  if (hook) hook(config.iterations, report.system);
  return report;
}

void apply_update(const TrainConfig& config, OptimizerState& state, nn::ParamVector& params,
                  std::span<const double> grad, std::size_t iteration) {
  if (!all_finite(grad)) throw TrainingAborted("training aborted: non-finite gradient", iteration);
  auto update = optimizer_step(config.optimizer, state, params.flat(), grad, config.learning_rate);
  std::copy(update.params.begin(), update.params.end(), params.flat().begin());
  state = std::move(update.state);
}

void check_loss(double loss, std::size_t iteration) {
  if (!std::isfinite(loss)) throw TrainingAborted("training aborted: non-finite loss", iteration);
}

}  // namespace

const char* to_string(TrainerKind kind) {
  switch (kind) {
    case TrainerKind::kMonteCarlo: return "monte_carlo";
    case TrainerKind::kPathIntegral: return "path_integral";
    case TrainerKind::kDirect: return "direct";
  }
  return "?";
}

TrainerKind parse_trainer(const std::string& name) {
  if (name == "monte_carlo") return TrainerKind::kMonteCarlo;
  if (name == "path_integral") return TrainerKind::kPathIntegral;
  if (name == "direct") return TrainerKind::kDirect;
  throw ContractViolation("unknown trainer '" + name + "' (expected monte_carlo, path_integral or direct)");
}

const char* to_string(OptimizerKind kind) { return kind == OptimizerKind::kSgd ? "sgd" : "adam"; }

OptimizerKind parse_optimizer(const std::string& name) {
  if (name == "sgd") return OptimizerKind::kSgd;
  if (name == "adam") return OptimizerKind::kAdam;
  throw ContractViolation("unknown optimizer '" + name + "' (expected sgd or adam)");
}

OptimizerUpdate optimizer_step(const OptimizerConfig& config, const OptimizerState& state,
                               std::span<const double> params, std::span<const double> grads, double learning_rate) {
  if (params.size() != grads.size()) throw ContractViolation("optimizer_step: parameter/gradient length mismatch");
  OptimizerUpdate out{{params.begin(), params.end()}, state};
  out.state.step += 1;
  if (config.kind == OptimizerKind::kSgd) {
    for (std::size_t i = 0; i < params.size(); ++i) out.params[i] -= learning_rate * grads[i];
    return out;
  }
  auto& m = out.state.first_moment;
  auto& v = out.state.second_moment;
  if (m.empty() && v.empty()) {
    m.assign(params.size(), 0.0);
    v.assign(params.size(), 0.0);
  }
  if (m.size() != params.size() || v.size() != params.size()) {
    throw ContractViolation("optimizer_step: optimizer state does not match the parameters");
  }
  const double t = static_cast<double>(out.state.step);
  const double c1 = 1.0 - std::pow(config.beta1, t);
  const double c2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * grads[i];
    v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * grads[i] * grads[i];
    const double m_hat = m[i] / c1;
    const double v_hat = v[i] / c2;
    out.params[i] -= learning_rate * m_hat / (std::sqrt(v_hat) + config.epsilon);
  }
  return out;
}

void TrainConfig::validate() const {
  if (!(kappa > 0.0)) throw ContractViolation("TrainConfig: kappa must be positive");
  if (kappa_d && !(*kappa_d > 0.0 && *kappa_d < 1.0)) throw ContractViolation("TrainConfig: kappa_d must lie in (0, 1)");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw ContractViolation("TrainConfig: learning_rate must be finite and nonnegative");
  }
  if (iterations < 1) throw ContractViolation("TrainConfig: iterations must be at least 1");
  if (batch_size < 1) throw ContractViolation("TrainConfig: batch_size must be at least 1");
  if (samples < 1) throw ContractViolation("TrainConfig: samples must be at least 1");
  if (steps < 1) throw ContractViolation("TrainConfig: steps must be at least 1");
}

double TrainConfig::resolved_kappa_d() const {
  return kappa_d ? *kappa_d : lyapunov::default_discrete_rate(kappa, steps);
}

TrainReport train_monte_carlo(const TrainConfig& config, const data::LabeledDataset& dataset, ode::OdeSystem system,
                              const CheckpointHook& hook) {
  check_inputs(config, dataset, system);
  const auto& dims = system.dims();
  sampling::StateSampler sampler;
  sampler.kind = config.sampler.value_or(sampling::default_sampler(dims.state));
  sampler.dim = dims.state;
  sampler.radius = sampling::hypercube_halfwidth(system.psi(), config.kappa, dims.classes);

  Rng rng(config.seed);
  OptimizerState opt;
  std::vector<double> grad;
  auto report = run_loop(config, std::move(system), hook, [&](ode::OdeSystem& sys, std::size_t it) {
    const auto batch = draw_minibatch(dataset, config.batch_size, rng);
    const auto samples = lyapunov::draw_state_time(sampler, config.samples, batch.size(), rng);
    const auto estimate = lyapunov::mc_loss(sys, batch, samples, config.kappa, config.workers, &grad);
    check_loss(estimate.value, it);
    apply_update(config, opt, sys.dynamics(), grad, it);
    return estimate.value;
  });
  report.sampler_radius = sampler.radius;
  return report;
}

TrainReport train_path_integral(const TrainConfig& config, const data::LabeledDataset& dataset,
                                ode::OdeSystem system, const CheckpointHook& hook) {
  check_inputs(config, dataset, system);
  const double kappa_d = config.resolved_kappa_d();
  Rng rng(config.seed);
  OptimizerState opt;
  std::vector<double> grad;
  return run_loop(config, std::move(system), hook, [&](ode::OdeSystem& sys, std::size_t it) {
    const auto batch = draw_minibatch(dataset, config.batch_size, rng);
    const auto estimate =
        lyapunov::path_integral_batch(sys, batch, config.steps, kappa_d, config.solver, config.workers, &grad);
    check_loss(estimate.value, it);
    apply_update(config, opt, sys.dynamics(), grad, it);
    return estimate.value;
  });
}

DirectLoss direct_loss(const ode::OdeSystem& system, const data::LabeledDataset& batch, std::size_t steps,
                       ode::Solver solver, std::size_t workers, bool want_gradient) {
  if (batch.empty()) throw ContractViolation("direct_loss: empty batch");
  std::vector<const nn::ParamVector*> nets{&system.dynamics()};
  if (system.phi()) nets.push_back(&*system.phi());
  auto result = detail::evaluate_chunked(
      nets, batch.size(), workers, want_gradient,
      [&](diff::Graph& graph, std::span<const nn::MlpBinding> bindings, std::size_t i) {
        const auto x = graph.constant(batch.inputs[i]);
        const auto eta0 = bindings.size() > 1 ? bindings[1].forward(graph, x)
                                              : graph.constant(std::vector<double>(system.dims().state, 0.0));
        const auto states = ode::rollout(graph, bindings[0], eta0, x, solver, steps);
        return potential::cross_entropy(graph, system.psi().apply(graph, states.back()), batch.labels[i]);
      });
  DirectLoss out;
  for (double v : result.values) out.value += v;
  const double inv = 1.0 / static_cast<double>(batch.size());
  out.value *= inv;
  if (want_gradient) {
    for (double& g : result.gradients[0]) g *= inv;
    out.dynamics_gradient = std::move(result.gradients[0]);
    if (result.gradients.size() > 1) {
      for (double& g : result.gradients[1]) g *= inv;
      out.phi_gradient = std::move(result.gradients[1]);
    }
  }
  return out;
}

TrainReport train_direct(const TrainConfig& config, const data::LabeledDataset& dataset, ode::OdeSystem system,
                         const CheckpointHook& hook) {
  check_inputs(config, dataset, system);
  Rng rng(config.seed);
  OptimizerState opt_dynamics;
  OptimizerState opt_phi;
  return run_loop(config, std::move(system), hook, [&](ode::OdeSystem& sys, std::size_t it) {
    const auto batch = draw_minibatch(dataset, config.batch_size, rng);
    const auto loss = direct_loss(sys, batch, config.steps, config.solver, config.workers);
    check_loss(loss.value, it);
    apply_update(config, opt_dynamics, sys.dynamics(), loss.dynamics_gradient, it);
    if (sys.phi()) apply_update(config, opt_phi, *sys.phi(), loss.phi_gradient, it);
    return loss.value;
  });
}

TrainReport train(const TrainConfig& config, const data::LabeledDataset& dataset, ode::OdeSystem system,
                  const CheckpointHook& hook) {
  switch (config.trainer) {
    case TrainerKind::kMonteCarlo: return train_monte_carlo(config, dataset, std::move(system), hook);
    case TrainerKind::kPathIntegral: return train_path_integral(config, dataset, std::move(system), hook);
    case TrainerKind::kDirect: return train_direct(config, dataset, std::move(system), hook);
  }
  throw ContractViolation("train: unknown trainer");
}

void write_train_csv(std::ostream& out, const TrainReport& report) {
  out << "iteration,loss,wall_ms\n";
  for (std::size_t i = 0; i < report.losses.size(); ++i) {
    out << (i + 1) << ',' << data::format_double(report.losses[i]) << ',' << data::format_double(report.wall_ms[i])
        << '\n';
  }
}

}  // namespace lyanet::train
