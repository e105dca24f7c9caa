#pragma once

// Potential functions V(eta) on the ODE state. The classifier potential is
// the truncated cross entropy of the output map:
//
//   V_y(eta) = max{0, -log softmax(psi(eta))[y] - gamma}
//
// Other potentials (used by the exact-stability checks) implement the same
// interface.

#include <cstddef>
#include <span>
#include <vector>

#include "lyanet/diff.hpp"
#include "lyanet/nn.hpp"

namespace lyanet::potential {

/// Double-precision machine epsilon, 2^-52.
inline constexpr double kDefaultTruncation = 0x1p-52;

/// Max-shifted softmax. Entries are positive and sum to 1.
std::vector<double> softmax(std::span<const double> logits);
double log_sum_exp(std::span<const double> logits);
/// -log softmax(logits)[label].
double cross_entropy(std::span<const double> logits, std::size_t label);
/// max{0, cross_entropy - gamma}. gamma must be nonnegative.
double truncated_cross_entropy(std::span<const double> logits, std::size_t label, double gamma);

/// Cross-entropy graph node: log_sum_exp(z) - <onehot(label), z>.
diff::NodeId cross_entropy(diff::Graph& graph, diff::NodeId logits, std::size_t label);

class Potential {
 public:
  virtual ~Potential() = default;

  virtual std::size_t dim() const = 0;
  virtual double value(std::span<const double> eta) const = 0;
  /// Graph form of value(); differentiable in eta.
  virtual diff::NodeId node(diff::Graph& graph, diff::NodeId eta) const = 0;
  /// dV/deta. Defaults to reverse mode through node().
  virtual std::vector<double> gradient(std::span<const double> eta) const;
};

class CrossEntropyPotential final : public Potential {
 public:
  CrossEntropyPotential(nn::OutputMap psi, std::size_t label, double gamma = kDefaultTruncation);

  std::size_t dim() const override { return psi_.input_dim(); }
  std::size_t label() const { return label_; }
  double gamma() const { return gamma_; }
  const nn::OutputMap& psi() const { return psi_; }

  double value(std::span<const double> eta) const override;
  diff::NodeId node(diff::Graph& graph, diff::NodeId eta) const override;
  /// Zero where the truncation is active.
  std::vector<double> gradient(std::span<const double> eta) const override;

 private:
  nn::OutputMap psi_;
  std::size_t label_;
  double gamma_;
};

/// V(eta) = 0.5 * |eta|^2.
class QuadraticPotential final : public Potential {
 public:
  explicit QuadraticPotential(std::size_t dim) : dim_(dim) {}

  std::size_t dim() const override { return dim_; }
  double value(std::span<const double> eta) const override;
  diff::NodeId node(diff::Graph& graph, diff::NodeId eta) const override;
  std::vector<double> gradient(std::span<const double> eta) const override;

 private:
  std::size_t dim_;
};

/// State with +s on `label` and -s on every other class coordinate.
std::vector<double> hypercube_corner(std::size_t classes, std::size_t label, double s);

struct ProjectionBounds {
  double sigma_lo = 0.0;
  double sigma_hi = 0.0;
  std::vector<double> reference;
  /// Sample points equal to the reference, left out of the estimate.
  std::size_t excluded = 0;
};

/// Empirical sandwich constants min/max of V(eta) / |eta - reference| over
/// the sample. Points equal to the reference are skipped with a warning on
/// std::clog. Throws ContractViolation if nothing remains.
ProjectionBounds projection_bounds_estimate(const Potential& potential,
                                            std::span<const std::vector<double>> states,
                                            std::span<const double> reference);

}  // namespace lyanet::potential
