#include "lyanet/ode.hpp"

#include <cmath>
#include <ostream>
#include <string>

#include "lyanet/data.hpp"
#include "lyanet/error.hpp"
#include "lyanet/potential.hpp"

namespace lyanet::ode {
namespace {

std::atomic<std::uint64_t> g_solver_invocations{0};

double grid_time(std::size_t j, std::size_t steps) {
  return static_cast<double>(j) / static_cast<double>(steps);
}

void check_finite(std::span<const double> eta, std::size_t step) {
  for (double v : eta) {
    if (!std::isfinite(v)) throw DivergenceError("ode: state diverged at step " + std::to_string(step), step);
  }
}

std::vector<double> euler_step(const VectorField& f, std::span<const double> eta, std::span<const double> x,
                               double t, double h) {
  const auto k = f(eta, x, t);
  std::vector<double> next(eta.size());
  for (std::size_t i = 0; i < eta.size(); ++i) next[i] = eta[i] + h * k[i];
  return next;
}

std::vector<double> rk4_step(const VectorField& f, std::span<const double> eta, std::span<const double> x,
                             double t, double h) {
  const std::size_t n = eta.size();
  const double half = 0.5 * h;
  std::vector<double> tmp(n);
  const auto k1 = f(eta, x, t);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = eta[i] + half * k1[i];
  const auto k2 = f(tmp, x, t + half);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = eta[i] + half * k2[i];
  const auto k3 = f(tmp, x, t + half);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = eta[i] + h * k3[i];
  const auto k4 = f(tmp, x, t + h);
  const double sixth = h / 6.0;
  std::vector<double> next(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double s = ((k1[i] + 2.0 * k2[i]) + 2.0 * k3[i]) + k4[i];
    next[i] = eta[i] + sixth * s;
  }
  return next;
}

}  // namespace

OdeSystem::OdeSystem(Dims dims, nn::ParamVector dynamics, nn::OutputMap psi, std::optional<nn::ParamVector> phi)
    : dims_(dims), dynamics_(std::move(dynamics)), psi_(std::move(psi)), phi_(std::move(phi)) {
  validate();
}

void OdeSystem::validate() const {
  if (dims_.input == 0 || dims_.state == 0 || dims_.classes == 0) {
    throw ContractViolation("OdeSystem: dimensions must be positive");
  }
  const auto& spec = dynamics_.spec();
  if (spec.input_size() != dims_.state + dims_.input + 1 || spec.output_size() != dims_.state) {
    throw ContractViolation("OdeSystem: dynamics must map k + n + 1 -> k");
  }
  if (psi_.input_dim() != dims_.state || psi_.output_dim() != dims_.classes) {
    throw ContractViolation("OdeSystem: output map must map k -> m");
  }
  if (phi_ && (phi_->spec().input_size() != dims_.input || phi_->spec().output_size() != dims_.state)) {
    throw ContractViolation("OdeSystem: initial-state map must map n -> k");
  }
}

OdeSystem OdeSystem::make_default(std::size_t input_dim, std::size_t classes, const std::vector<std::size_t>& hidden,
                                  nn::Activation activation, std::uint64_t seed, bool learnable_phi) {
  const Dims dims{input_dim, classes, classes};
  std::vector<std::size_t> widths{dims.state + dims.input + 1};
  widths.insert(widths.end(), hidden.begin(), hidden.end());
  widths.push_back(dims.state);
  auto dynamics = nn::mlp_init(nn::MlpSpec::make(widths, activation, seed));
  std::optional<nn::ParamVector> phi;
  if (learnable_phi) phi = nn::mlp_init(nn::MlpSpec::make({dims.input, dims.state}, activation, seed + 1));
  return OdeSystem(dims, std::move(dynamics), nn::OutputMap::identity(dims.state), std::move(phi));
}

std::vector<double> OdeSystem::initial_state(std::span<const double> x) const {
  if (x.size() != dims_.input) throw ContractViolation("OdeSystem: input size mismatch");
  if (phi_) return nn::mlp_forward(*phi_, x);
  return std::vector<double>(dims_.state, 0.0);
}

std::vector<double> OdeSystem::field(std::span<const double> eta, std::span<const double> x, double t) const {
  if (eta.size() != dims_.state || x.size() != dims_.input) throw ContractViolation("OdeSystem: field argument size");
  std::vector<double> in;
  in.reserve(eta.size() + x.size() + 1);
  in.insert(in.end(), eta.begin(), eta.end());
  in.insert(in.end(), x.begin(), x.end());
  in.push_back(t);
  return nn::mlp_forward(dynamics_, in);
}

VectorField as_field(const OdeSystem& system) {
  return [&system](std::span<const double> eta, std::span<const double> x, double t) {
    return system.field(eta, x, t);
  };
}

const char* to_string(Solver solver) { return solver == Solver::kEuler ? "euler" : "rk4"; }

Solver parse_solver(const std::string& name) {
  if (name == "euler") return Solver::kEuler;
  if (name == "rk4") return Solver::kRk4;
  throw ContractViolation("unknown solver '" + name + "' (expected euler or rk4)");
}

void Trajectory::validate() const {
  if (times.size() != states.size() || times.size() < 2) throw ContractViolation("Trajectory: bad length");
  if (times.front() != 0.0 || times.back() != 1.0) throw ContractViolation("Trajectory: must span [0, 1]");
  for (std::size_t i = 1; i < times.size(); ++i) {
    if (!(times[i] > times[i - 1])) throw ContractViolation("Trajectory: times must increase");
  }
  for (const auto& s : states) {
    for (double v : s) {
      if (!std::isfinite(v)) throw ContractViolation("Trajectory: non-finite state");
    }
  }
}

std::vector<double> step(const VectorField& f, std::span<const double> eta, std::span<const double> x, double t,
                         double h, Solver solver) {
  return solver == Solver::kEuler ? euler_step(f, eta, x, t, h) : rk4_step(f, eta, x, t, h);
}

Trajectory solve(const VectorField& f, std::span<const double> eta0, std::span<const double> x, Solver solver,
                 std::size_t steps) {
  if (steps < 1) throw ContractViolation("ode: steps must be at least 1");
  g_solver_invocations.fetch_add(1, std::memory_order_relaxed);
  const double h = 1.0 / static_cast<double>(steps);
  Trajectory traj;
  traj.times.reserve(steps + 1);
  traj.states.reserve(steps + 1);
  traj.times.push_back(0.0);
  traj.states.emplace_back(eta0.begin(), eta0.end());
  check_finite(traj.states.back(), 0);
  for (std::size_t j = 1; j <= steps; ++j) {
    auto next = step(f, traj.states.back(), x, grid_time(j - 1, steps), h, solver);
    check_finite(next, j);
    traj.times.push_back(grid_time(j, steps));
    traj.states.push_back(std::move(next));
  }
  return traj;
}

Trajectory solve(const OdeSystem& system, std::span<const double> x, Solver solver, std::size_t steps) {
  return solve(as_field(system), system.initial_state(x), x, solver, steps);
}

Trajectory euler_solve(const VectorField& f, std::span<const double> eta0, std::span<const double> x,
                       std::size_t steps) {
  return solve(f, eta0, x, Solver::kEuler, steps);
}

Trajectory euler_solve(const OdeSystem& system, std::span<const double> x, std::size_t steps) {
  return solve(system, x, Solver::kEuler, steps);
}

Trajectory rk4_solve(const VectorField& f, std::span<const double> eta0, std::span<const double> x,
                     std::size_t steps) {
  return solve(f, eta0, x, Solver::kRk4, steps);
}

Trajectory rk4_solve(const OdeSystem& system, std::span<const double> x, std::size_t steps) {
  return solve(system, x, Solver::kRk4, steps);
}

std::vector<double> state_at(const VectorField& f, std::span<const double> eta0, std::span<const double> x,
                             double t_end, Solver solver, std::size_t steps) {
  if (!(t_end > 0.0 && t_end <= 1.0)) throw ContractViolation("ode: t_end must lie in (0, 1]");
  if (steps < 1) throw ContractViolation("ode: steps must be at least 1");
  g_solver_invocations.fetch_add(1, std::memory_order_relaxed);
  const double h = 1.0 / static_cast<double>(steps);
  std::size_t full = static_cast<std::size_t>(std::floor(t_end * static_cast<double>(steps)));
  if (full > steps) full = steps;
  while (full > 0 && grid_time(full, steps) > t_end) --full;
  while (full < steps && grid_time(full + 1, steps) <= t_end) ++full;
  std::vector<double> eta(eta0.begin(), eta0.end());
  check_finite(eta, 0);
  for (std::size_t j = 1; j <= full; ++j) {
    eta = step(f, eta, x, grid_time(j - 1, steps), h, solver);
    check_finite(eta, j);
  }
  const double t_full = grid_time(full, steps);
  if (t_end > t_full) {
    eta = step(f, eta, x, t_full, t_end - t_full, solver);
    check_finite(eta, full + 1);
  }
  return eta;
}

std::vector<double> infer(const OdeSystem& system, std::span<const double> x, double t_end, Solver solver,
                          std::size_t steps) {
  const auto eta = state_at(as_field(system), system.initial_state(x), x, t_end, solver, steps);
  return potential::softmax(system.logits(eta));
}

std::uint64_t solver_invocations() { return g_solver_invocations.load(std::memory_order_relaxed); }

std::vector<diff::NodeId> rollout(diff::Graph& graph, const nn::MlpBinding& dynamics, diff::NodeId eta0,
                                  diff::NodeId x, Solver solver, std::size_t steps) {
  if (steps < 1) throw ContractViolation("ode: steps must be at least 1");
  g_solver_invocations.fetch_add(1, std::memory_order_relaxed);
  const double h = 1.0 / static_cast<double>(steps);
  auto field = [&](diff::NodeId eta, double t) {
    return dynamics.forward(graph, graph.concat({eta, x, graph.constant(t)}));
  };
  std::vector<diff::NodeId> states{eta0};
  states.reserve(steps + 1);
  for (std::size_t j = 1; j <= steps; ++j) {
    const diff::NodeId eta = states.back();
    const double t = grid_time(j - 1, steps);
    diff::NodeId next;
    if (solver == Solver::kEuler) {
      next = graph.add(eta, graph.scale(field(eta, t), h));
    } else {
      const double half = 0.5 * h;
      const auto k1 = field(eta, t);
      const auto k2 = field(graph.add(eta, graph.scale(k1, half)), t + half);
      const auto k3 = field(graph.add(eta, graph.scale(k2, half)), t + half);
      const auto k4 = field(graph.add(eta, graph.scale(k3, h)), t + h);
      const auto s = graph.add(graph.add(graph.add(k1, graph.scale(k2, 2.0)), graph.scale(k3, 2.0)), k4);
      next = graph.add(eta, graph.scale(s, h / 6.0));
    }
    for (double v : graph.value(next)) {
      if (!std::isfinite(v)) throw DivergenceError("ode: rollout diverged at step " + std::to_string(j), j);
    }
    states.push_back(next);
  }
  return states;
}

void write_trajectory_csv(std::ostream& out, const Trajectory& trajectory) {
  const std::size_t k = trajectory.states.empty() ? 0 : trajectory.states.front().size();
  out << 't';
  for (std::size_t i = 0; i < k; ++i) out << ",eta_" << i;
  out << '\n';
  for (std::size_t j = 0; j < trajectory.size(); ++j) {
    out << data::format_double(trajectory.times[j]);
    for (double v : trajectory.states[j]) out << ',' << data::format_double(v);
    out << '\n';
  }
}

}  // namespace lyanet::ode
