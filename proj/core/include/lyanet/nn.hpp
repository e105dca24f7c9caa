#pragma once

// Multilayer perceptrons restricted to globally Lipschitz layers (affine maps
// with relu or tanh between them), their flat parameter storage, and the
// frozen output map applied to the ODE state.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "lyanet/diff.hpp"
#include "lyanet/rng.hpp"

namespace lyanet::nn {

enum class Activation : std::uint8_t { kRelu = 0, kTanh = 1 };

struct MlpSpec {
  /// widths[0] is the input size, widths.back() the output size.
  std::vector<std::size_t> widths;
  /// One per hidden layer (widths.size() - 2 entries); the output layer is affine.
  std::vector<Activation> activations;
  std::uint64_t seed = 0;

  /// Throws ContractViolation unless there is at least one layer, all widths
  /// are positive and the activation count matches.
  void validate() const;
  std::size_t layer_count() const { return widths.size() - 1; }
  std::size_t input_size() const { return widths.front(); }
  std::size_t output_size() const { return widths.back(); }
  std::size_t parameter_count() const;

  /// Uniform activation across all hidden layers.
  static MlpSpec make(std::vector<std::size_t> widths, Activation activation, std::uint64_t seed);
};

/// All weights and biases of one MLP in a single flat buffer.
///
/// Layout, layer by layer: the weight matrix (rows = output width,
/// cols = input width) in row-major order, then the bias vector.
class ParamVector {
 public:
  explicit ParamVector(MlpSpec spec);

  static ParamVector unflatten(const MlpSpec& spec, std::span<const double> flat);
  std::vector<double> flatten() const { return values_; }

  const MlpSpec& spec() const { return spec_; }
  std::size_t size() const { return values_.size(); }
  std::span<const double> flat() const { return values_; }
  std::span<double> flat() { return values_; }

  std::size_t weight_offset(std::size_t layer) const { return offsets_.at(layer); }
  std::size_t bias_offset(std::size_t layer) const;
  std::size_t rows(std::size_t layer) const { return spec_.widths.at(layer + 1); }
  std::size_t cols(std::size_t layer) const { return spec_.widths.at(layer); }

  std::span<const double> weights(std::size_t layer) const;
  std::span<double> weights(std::size_t layer);
  std::span<const double> bias(std::size_t layer) const;
  std::span<double> bias(std::size_t layer);

 private:
  MlpSpec spec_;
  std::vector<std::size_t> offsets_;
  std::vector<double> values_;
};

/// Weights uniform on [-1/sqrt(fan_in), 1/sqrt(fan_in)], biases zero.
/// Deterministic in spec.seed.
ParamVector mlp_init(const MlpSpec& spec);

/// Plain evaluation. Throws ContractViolation on an input size mismatch.
std::vector<double> mlp_forward(const ParamVector& params, std::span<const double> input);

/// An MLP's parameters placed on a graph, either as trainable leaves or as
/// frozen constants.
class MlpBinding {
 public:
  /// Leaves are first_leaf + 2*layer (weights) and first_leaf + 2*layer + 1
  /// (bias). The graph views `params` directly; keep it alive.
  static MlpBinding trainable(diff::Graph& graph, const ParamVector& params, diff::LeafId first_leaf);
  static MlpBinding frozen(diff::Graph& graph, const ParamVector& params);

  diff::NodeId forward(diff::Graph& graph, diff::NodeId input) const;

  /// Adds the adjoint of `leaf` into `flat_grad` (laid out like the
  /// ParamVector) and returns true if the leaf belongs to this binding.
  bool accumulate(diff::LeafId leaf, std::span<const double> adjoint, std::span<double> flat_grad) const;

  diff::LeafId first_leaf() const { return first_leaf_; }
  std::size_t leaf_count() const { return trainable_ ? 2 * layers_.size() : 0; }

 private:
  struct Layer {
    diff::NodeId weights;
    diff::NodeId bias;
    std::size_t weight_offset;
    std::size_t bias_offset;
  };
  std::vector<Layer> layers_;
  std::vector<Activation> activations_;
  std::size_t input_size_ = 0;
  diff::LeafId first_leaf_ = 0;
  bool trainable_ = false;
};

/// Output map psi from state to logits: identity or a frozen affine map.
class OutputMap {
 public:
  static OutputMap identity(std::size_t dim);
  /// weights: rows x cols row-major, bias: rows.
  static OutputMap affine(std::size_t rows, std::size_t cols, std::vector<double> weights,
                          std::vector<double> bias);

  bool is_identity() const { return identity_; }
  std::size_t input_dim() const { return cols_; }
  std::size_t output_dim() const { return rows_; }
  std::span<const double> weights() const { return weights_; }
  std::span<const double> bias() const { return bias_; }

  std::vector<double> apply(std::span<const double> state) const;
  diff::NodeId apply(diff::Graph& graph, diff::NodeId state) const;
  /// Spectral norm of the linear part (1 for the identity).
  double operator_norm() const;

 private:
  bool identity_ = true;
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> weights_;
  std::vector<double> bias_;
};

struct NormEstimate {
  double value = 0.0;
  bool converged = false;
  std::size_t iterations = 0;
};

/// Largest singular value of a row-major matrix by power iteration on W^T W.
NormEstimate operator_norm(std::span<const double> matrix, std::size_t rows, std::size_t cols,
                           std::size_t max_iterations = 200, double tolerance = 1e-9);

struct LipschitzEstimate {
  double bound = 0.0;
  /// False if any layer's power iteration stopped before converging; the
  /// bound is then built from the last iterates.
  bool converged = true;
};

/// Product over layers of the weight operator norms. Activations are
/// 1-Lipschitz, so this bounds the network's global Lipschitz constant in the
/// Euclidean norm.
LipschitzEstimate lipschitz_upper_bound(const ParamVector& params);

/// Same bound for the map restricted to input coordinates
/// [first_input, first_input + input_count), the others held fixed.
LipschitzEstimate lipschitz_upper_bound(const ParamVector& params, std::size_t first_input,
                                        std::size_t input_count);

/// Max of |f(a) - f(b)| / |a - b| over `pairs` random pairs drawn uniformly
/// from [-half_width, half_width]^n. A lower estimate of the true constant.
double sampled_lipschitz(const ParamVector& params, Rng& rng, std::size_t pairs, double half_width);

}  // namespace lyanet::nn
