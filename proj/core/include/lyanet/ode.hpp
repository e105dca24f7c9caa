#pragma once

// Inference dynamics of a neural ODE classifier and its fixed-step solvers.
//
//   eta(0) = phi(x)            (zero by default)
//   d eta / dt = f(eta, x, t)  (f sees the concatenation [eta, x, t])
//   y_hat(t) = psi(eta(t))
//
// Time runs over [0, 1] on the uniform grid t_j = j / steps.

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lyanet/diff.hpp"
#include "lyanet/nn.hpp"

namespace lyanet::ode {

struct Dims {
  std::size_t input = 0;    // n
  std::size_t state = 0;    // k
  std::size_t classes = 0;  // m
};

class OdeSystem {
 public:
  /// phi absent means eta(0) = 0.
  OdeSystem(Dims dims, nn::ParamVector dynamics, nn::OutputMap psi,
            std::optional<nn::ParamVector> phi = std::nullopt);

  /// Default architecture: f is an MLP on [eta, x, t] with the given hidden
  /// widths, psi is the identity and the state has one entry per class.
  static OdeSystem make_default(std::size_t input_dim, std::size_t classes,
                                const std::vector<std::size_t>& hidden, nn::Activation activation,
                                std::uint64_t seed, bool learnable_phi = false);

  const Dims& dims() const { return dims_; }
  const nn::ParamVector& dynamics() const { return dynamics_; }
  nn::ParamVector& dynamics() { return dynamics_; }
  const std::optional<nn::ParamVector>& phi() const { return phi_; }
  std::optional<nn::ParamVector>& phi() { return phi_; }
  const nn::OutputMap& psi() const { return psi_; }

  std::vector<double> initial_state(std::span<const double> x) const;
  /// f(eta, x, t).
  std::vector<double> field(std::span<const double> eta, std::span<const double> x, double t) const;
  std::vector<double> logits(std::span<const double> eta) const { return psi_.apply(eta); }

 private:
  void validate() const;

  Dims dims_;
  nn::ParamVector dynamics_;
  nn::OutputMap psi_;
  std::optional<nn::ParamVector> phi_;
};

using VectorField =
    std::function<std::vector<double>(std::span<const double> eta, std::span<const double> x, double t)>;

VectorField as_field(const OdeSystem& system);

enum class Solver : std::uint8_t { kEuler, kRk4 };

const char* to_string(Solver solver);
/// Accepts "euler" and "rk4". Throws ContractViolation otherwise.
Solver parse_solver(const std::string& name);

struct Trajectory {
  std::vector<double> times;
  std::vector<std::vector<double>> states;

  std::size_t size() const { return times.size(); }
  const std::vector<double>& final_state() const { return states.back(); }
  /// Throws ContractViolation unless lengths match, times increase strictly
  /// from exactly 0 to exactly 1 and every state is finite.
  void validate() const;
};

/// eta_j = eta_{j-1} + delta * f(eta_{j-1}, x, t_{j-1}) with delta = 1/steps.
/// Throws DivergenceError (with the step index) on a non-finite state.
Trajectory euler_solve(const VectorField& f, std::span<const double> eta0, std::span<const double> x,
                       std::size_t steps);
Trajectory euler_solve(const OdeSystem& system, std::span<const double> x, std::size_t steps);

/// Classical fourth-order Runge-Kutta with fixed step 1/steps.
Trajectory rk4_solve(const VectorField& f, std::span<const double> eta0, std::span<const double> x,
                     std::size_t steps);
Trajectory rk4_solve(const OdeSystem& system, std::span<const double> x, std::size_t steps);

Trajectory solve(const VectorField& f, std::span<const double> eta0, std::span<const double> x, Solver solver,
                 std::size_t steps);
Trajectory solve(const OdeSystem& system, std::span<const double> x, Solver solver, std::size_t steps);

/// One solver step of size h from (eta, t).
std::vector<double> step(const VectorField& f, std::span<const double> eta, std::span<const double> x,
                         double t, double h, Solver solver);

/// State at `t_end` in (0, 1]: full grid steps of size 1/steps up to the last
/// node at or before t_end, then one partial step to t_end. Identical to the
/// trajectory node whenever t_end lies on the grid.
std::vector<double> state_at(const VectorField& f, std::span<const double> eta0, std::span<const double> x,
                             double t_end, Solver solver, std::size_t steps);

/// softmax(psi(eta(t_end))). t_end < 1 is early inference termination.
std::vector<double> infer(const OdeSystem& system, std::span<const double> x, double t_end, Solver solver,
                          std::size_t steps);

/// Number of solver runs (plain or differentiable) since process start.
std::uint64_t solver_invocations();

/// Differentiable rollout on a graph: returns the node of every grid state,
/// starting with `eta0`. `dynamics` must be bound to the same graph.
std::vector<diff::NodeId> rollout(diff::Graph& graph, const nn::MlpBinding& dynamics, diff::NodeId eta0,
                                  diff::NodeId x, Solver solver, std::size_t steps);

/// Header `t,eta_0,...,eta_{k-1}`, one row per grid node.
void write_trajectory_csv(std::ostream& out, const Trajectory& trajectory);

}  // namespace lyanet::ode
