#pragma once

// Measurements on a trained system: accuracy, early-termination curves, the
// exponential-decay audit, PGD attacks and the Lipschitz robustness
// certificate.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "lyanet/data.hpp"
#include "lyanet/ode.hpp"
#include "lyanet/potential.hpp"
#include "lyanet/rng.hpp"

namespace lyanet::eval {

/// Index of the largest entry; ties go to the lowest index.
std::size_t argmax(std::span<const double> values);

struct AccuracyReport {
  double accuracy = 0.0;
  /// confusion[true][predicted].
  std::vector<std::vector<std::size_t>> confusion;
};

/// Fraction of examples whose infer() argmax at t_end equals the label.
AccuracyReport accuracy(const ode::OdeSystem& system, const data::LabeledDataset& dataset, double t_end,
                        ode::Solver solver, std::size_t steps, std::size_t workers = 0);

struct CurvePoint {
  double t = 0.0;
  double mean_loss = 0.0;
  double accuracy = 0.0;
};

/// One integration pass per example serves every time in `times` (each in
/// (0, 1]); values equal those of infer() at the same times.
std::vector<CurvePoint> convergence_curve(const ode::OdeSystem& system, const data::LabeledDataset& dataset,
                                          std::span<const double> times, ode::Solver solver, std::size_t steps,
                                          std::size_t workers = 0);

/// `count` evenly spaced times from `first` to `last` inclusive.
std::vector<double> linspace(double first, double last, std::size_t count);

/// Header `t,mean_loss,accuracy`.
void write_curve_csv(std::ostream& out, std::span<const CurvePoint> curve);

inline constexpr std::size_t kAuditSteps = 128;
/// Allowed decay violation as a fraction of V(eta(0)).
inline constexpr double kAuditTolerance = 0.05;

struct DecayAuditEntry {
  double initial_value = 0.0;
  double final_value = 0.0;
  /// max over the grid of V(eta(t)) - V(eta(0)) e^{-rate t}.
  double violation = 0.0;
  double worst_time = 0.0;

  bool passes(double tolerance = kAuditTolerance) const { return violation <= tolerance * initial_value; }
};

struct DecayAudit {
  std::vector<DecayAuditEntry> entries;
  std::size_t steps = kAuditSteps;
  ode::Solver solver = ode::Solver::kRk4;
  double rate = 0.0;
};

/// Generic audit of one trajectory of `field` against V(0) e^{-rate t}.
DecayAuditEntry audit_trajectory(const potential::Potential& potential, const ode::VectorField& field,
                                 std::span<const double> eta0, std::span<const double> x, double rate,
                                 ode::Solver solver = ode::Solver::kRk4, std::size_t steps = kAuditSteps);

/// Classifier audit with V the truncated cross entropy (default truncation).
DecayAuditEntry stability_audit(const ode::OdeSystem& system, std::span<const double> x, std::size_t label,
                                double kappa, ode::Solver solver = ode::Solver::kRk4,
                                std::size_t steps = kAuditSteps);
DecayAudit stability_audit(const ode::OdeSystem& system, const data::LabeledDataset& dataset, double kappa,
                           ode::Solver solver = ode::Solver::kRk4, std::size_t steps = kAuditSteps,
                           std::size_t workers = 0);

/// Header `index,label,initial_value,final_value,violation,worst_time,passes`.
void write_audit_csv(std::ostream& out, const DecayAudit& audit, const data::LabeledDataset& dataset);

struct DeltaStability {
  bool correct = false;
  bool exp_stable = false;
  /// V(eta(1)) on the audit trajectory.
  double delta = 0.0;
  DecayAuditEntry audit;
};

/// Correct classification at t = 1, decay within tolerance, and the final
/// value within tolerance of e^{-kappa} V(eta(0)).
DeltaStability delta_stability_check(const ode::OdeSystem& system, std::span<const double> x, std::size_t label,
                                     double kappa, ode::Solver solver = ode::Solver::kRk4,
                                     std::size_t steps = kAuditSteps, double tolerance = kAuditTolerance);

enum class Norm : std::uint8_t { kLinf, kL2 };

const char* to_string(Norm norm);
/// "linf" or "l2".
Norm parse_norm(const std::string& name);
double norm(std::span<const double> v, Norm which);

struct PgdConfig {
  Norm norm = Norm::kLinf;
  double epsilon = 0.1;
  std::size_t steps = 10;
  double step_size = 0.025;
};

/// x -> gradient of the attacked loss at x.
using LossGradient = std::function<std::vector<double>(std::span<const double> x)>;

/// x <- project(x + step_size * g), g the gradient sign (L-inf) or the
/// unit-L2 gradient (L2); projection onto the epsilon ball around x0. A zero
/// gradient leaves x unchanged for that step.
std::vector<double> pgd_attack(const LossGradient& gradient, std::span<const double> x0, const PgdConfig& config);

/// Gradient with respect to the input of the cross entropy at t = 1.
std::vector<double> input_gradient(const ode::OdeSystem& system, std::span<const double> x, std::size_t label,
                                   ode::Solver solver, std::size_t steps);

std::vector<double> pgd_attack(const ode::OdeSystem& system, std::span<const double> x0, std::size_t label,
                               const PgdConfig& config, ode::Solver solver, std::size_t steps);

struct AttackRecord {
  bool clean_correct = false;
  bool adversarial_correct = false;
  double perturbation_norm = 0.0;
};

struct AttackSummary {
  std::vector<AttackRecord> records;
  double clean_error = 0.0;
  double adversarial_error = 0.0;
};

AttackSummary attack_dataset(const ode::OdeSystem& system, const data::LabeledDataset& dataset,
                             const PgdConfig& config, ode::Solver solver, std::size_t steps,
                             std::size_t workers = 0);

/// Header `index,label,clean_correct,adversarial_correct,perturbation_norm`.
void write_attack_csv(std::ostream& out, const AttackSummary& summary, const data::LabeledDataset& dataset);

struct Certificate {
  double delta = 0.0;
  /// Sound Lipschitz bound; the radius is computed from it.
  double lipschitz = 0.0;
  /// Sampled lower estimate, reported only.
  double lipschitz_sampled = 0.0;
  double kappa = 0.0;
  double radius = 0.0;
  Norm norm = Norm::kLinf;
  bool lipschitz_converged = true;
  /// Dataset certificates only: examples seen and examples passing
  /// delta_stability_check (the ones the radius applies to).
  std::size_t examples = 0;
  std::size_t certified_examples = 0;
};

/// radius = max{0, (ln 2 - delta) kappa / (L (1 - e^{-kappa}))}, zero when
/// delta > ln 2. Throws ContractViolation unless delta >= 0, L > 0, kappa > 0.
Certificate robustness_certificate(double delta, double lipschitz, double kappa);

struct LipschitzComposition {
  /// Bound on |grad V| over the state space: sqrt(2) |W_psi|.
  double potential = 0.0;
  /// Operator-norm bound of the dynamics with respect to x alone.
  double field_input = 0.0;
  /// potential * field_input * sqrt(n): an L-inf perturbation of size e has
  /// Euclidean size at most sqrt(n) e.
  double total = 0.0;
  /// Same composition with a sampled estimate of the x-Lipschitz constant.
  double sampled_total = 0.0;
  bool converged = true;
};

/// The sampled estimate draws states from [-state_half_width, state_half_width]^k
/// and inputs from [-input_half_width, input_half_width]^n.
LipschitzComposition certificate_lipschitz(const ode::OdeSystem& system, double state_half_width,
                                           double input_half_width, std::size_t pairs, std::uint64_t seed);

inline constexpr std::size_t kLipschitzPairs = 10000;

/// One certificate for a dataset: delta is the largest final potential among
/// examples passing delta_stability_check, so the radius holds for each of
/// them. With no such example the radius is 0.
Certificate certify_dataset(const ode::OdeSystem& system, const data::LabeledDataset& dataset, double kappa,
                            ode::Solver solver = ode::Solver::kRk4, std::size_t steps = kAuditSteps,
                            std::uint64_t seed = 0, std::size_t workers = 0);

/// `key=value` lines: norm, delta, lipschitz, lipschitz_sampled,
/// lipschitz_converged, kappa, radius, examples, certified_examples.
void write_certificate(std::ostream& out, const Certificate& certificate);
/// Throws ParseError on a malformed or incomplete record.
Certificate read_certificate(std::istream& in);

/// Number of `draws` uniform L-inf perturbations of size <= radius that
/// change the t = 1 prediction away from `label`.
std::size_t count_flips(const ode::OdeSystem& system, std::span<const double> x, std::size_t label, double radius,
                        std::size_t draws, Rng& rng, ode::Solver solver, std::size_t steps);

}  // namespace lyanet::eval
