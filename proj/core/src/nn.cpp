#include "lyanet/nn.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "lyanet/error.hpp"

namespace lyanet::nn {

void MlpSpec::validate() const {
  if (widths.size() < 2) throw ContractViolation("MlpSpec: need at least one layer");
  for (std::size_t w : widths) {
    if (w == 0) throw ContractViolation("MlpSpec: widths must be positive");
  }
  if (activations.size() != widths.size() - 2) {
    throw ContractViolation("MlpSpec: expected " + std::to_string(widths.size() - 2) +
                            " hidden activations, got " + std::to_string(activations.size()));
  }
}

std::size_t MlpSpec::parameter_count() const {
  std::size_t total = 0;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) total += widths[l + 1] * (widths[l] + 1);
  return total;
}

MlpSpec MlpSpec::make(std::vector<std::size_t> widths, Activation activation, std::uint64_t seed) {
  MlpSpec spec;
  const std::size_t hidden = widths.size() >= 2 ? widths.size() - 2 : 0;
  spec.widths = std::move(widths);
  spec.activations.assign(hidden, activation);
  spec.seed = seed;
  return spec;
}

ParamVector::ParamVector(MlpSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  std::size_t offset = 0;
  for (std::size_t l = 0; l < spec_.layer_count(); ++l) {
    offsets_.push_back(offset);
    offset += rows(l) * (cols(l) + 1);
  }
  values_.assign(offset, 0.0);
}

ParamVector ParamVector::unflatten(const MlpSpec& spec, std::span<const double> flat) {
  ParamVector p(spec);
  if (flat.size() != p.size()) {
    throw ContractViolation("ParamVector: expected " + std::to_string(p.size()) + " values, got " +
                            std::to_string(flat.size()));
  }
  std::copy(flat.begin(), flat.end(), p.values_.begin());
  return p;
}

std::size_t ParamVector::bias_offset(std::size_t layer) const {
  return weight_offset(layer) + rows(layer) * cols(layer);
}

std::span<const double> ParamVector::weights(std::size_t layer) const {
  return std::span<const double>(values_).subspan(weight_offset(layer), rows(layer) * cols(layer));
}
std::span<double> ParamVector::weights(std::size_t layer) {
  return std::span<double>(values_).subspan(weight_offset(layer), rows(layer) * cols(layer));
}
std::span<const double> ParamVector::bias(std::size_t layer) const {
  return std::span<const double>(values_).subspan(bias_offset(layer), rows(layer));
}
std::span<double> ParamVector::bias(std::size_t layer) {
  return std::span<double>(values_).subspan(bias_offset(layer), rows(layer));
}

ParamVector mlp_init(const MlpSpec& spec) {
  ParamVector params(spec);
  Rng rng(spec.seed);
  for (std::size_t l = 0; l < spec.layer_count(); ++l) {
    const double limit = 1.0 / std::sqrt(static_cast<double>(params.cols(l)));
    for (double& w : params.weights(l)) w = rng.uniform(-limit, limit);
  }
  return params;
}

namespace {

double activate(Activation a, double x) {
  return a == Activation::kTanh ? std::tanh(x) : (x > 0.0 ? x : 0.0);
}

}  // namespace

std::vector<double> mlp_forward(const ParamVector& params, std::span<const double> input) {
  const MlpSpec& spec = params.spec();
  if (input.size() != spec.input_size()) {
    throw ContractViolation("mlp_forward: input has " + std::to_string(input.size()) + " entries, expected " +
                            std::to_string(spec.input_size()));
  }
  std::vector<double> h(input.begin(), input.end());
  std::vector<double> next;
  for (std::size_t l = 0; l < spec.layer_count(); ++l) {
    const std::size_t rows = params.rows(l);
    const std::size_t cols = params.cols(l);
    const double* w = params.weights(l).data();
    const double* b = params.bias(l).data();
    next.assign(rows, 0.0);
    for (std::size_t i = 0; i < rows; ++i) {
      const double* row = w + i * cols;
      double acc = 0.0;
      for (std::size_t j = 0; j < cols; ++j) acc += row[j] * h[j];
      next[i] = acc + b[i];
    }
    if (l + 1 < spec.layer_count()) {
      for (double& v : next) v = activate(spec.activations[l], v);
    }
    h.swap(next);
  }
  return h;
}

MlpBinding MlpBinding::trainable(diff::Graph& graph, const ParamVector& params, diff::LeafId first_leaf) {
  MlpBinding b;
  b.trainable_ = true;
  b.first_leaf_ = first_leaf;
  b.activations_ = params.spec().activations;
  b.input_size_ = params.spec().input_size();
  for (std::size_t l = 0; l < params.spec().layer_count(); ++l) {
    const auto leaf = static_cast<diff::LeafId>(first_leaf + 2 * l);
    Layer layer{};
    layer.weights = graph.parameter(leaf, params.weights(l), diff::Shape{params.rows(l), params.cols(l)});
    layer.bias = graph.parameter(leaf + 1, params.bias(l), diff::Shape{params.rows(l), 1});
    layer.weight_offset = params.weight_offset(l);
    layer.bias_offset = params.bias_offset(l);
    b.layers_.push_back(layer);
  }
  return b;
}

MlpBinding MlpBinding::frozen(diff::Graph& graph, const ParamVector& params) {
  MlpBinding b;
  b.activations_ = params.spec().activations;
  b.input_size_ = params.spec().input_size();
  for (std::size_t l = 0; l < params.spec().layer_count(); ++l) {
    Layer layer{};
    layer.weights = graph.constant(params.weights(l), diff::Shape{params.rows(l), params.cols(l)});
    layer.bias = graph.constant(params.bias(l));
    layer.weight_offset = params.weight_offset(l);
    layer.bias_offset = params.bias_offset(l);
    b.layers_.push_back(layer);
  }
  return b;
}

diff::NodeId MlpBinding::forward(diff::Graph& graph, diff::NodeId input) const {
  if (graph.shape(input).size() != input_size_) throw ContractViolation("MlpBinding: input size mismatch");
  diff::NodeId h = input;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    h = graph.add(graph.matvec(layers_[l].weights, h), layers_[l].bias);
    if (l + 1 < layers_.size()) {
      h = activations_[l] == Activation::kTanh ? graph.tanh(h) : graph.relu(h);
    }
  }
  return h;
}

bool MlpBinding::accumulate(diff::LeafId leaf, std::span<const double> adjoint, std::span<double> flat_grad) const {
  if (!trainable_ || leaf < first_leaf_ || leaf >= first_leaf_ + leaf_count()) return false;
  const std::size_t index = leaf - first_leaf_;
  const Layer& layer = layers_[index / 2];
  const std::size_t offset = index % 2 == 0 ? layer.weight_offset : layer.bias_offset;
  double* out = flat_grad.data() + offset;
  for (std::size_t i = 0; i < adjoint.size(); ++i) out[i] += adjoint[i];
  return true;
}

OutputMap OutputMap::identity(std::size_t dim) {
  OutputMap m;
  m.identity_ = true;
  m.rows_ = dim;
  m.cols_ = dim;
  return m;
}

OutputMap OutputMap::affine(std::size_t rows, std::size_t cols, std::vector<double> weights,
                            std::vector<double> bias) {
  if (weights.size() != rows * cols || bias.size() != rows) {
    throw ContractViolation("OutputMap: affine weights/bias do not match the declared shape");
  }
  OutputMap m;
  m.identity_ = false;
  m.rows_ = rows;
  m.cols_ = cols;
  m.weights_ = std::move(weights);
  m.bias_ = std::move(bias);
  return m;
}

std::vector<double> OutputMap::apply(std::span<const double> state) const {
  if (state.size() != cols_) throw ContractViolation("OutputMap: state size mismatch");
  if (identity_) return {state.begin(), state.end()};
  std::vector<double> out(rows_);
  for (std::size_t i = 0; i < rows_; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < cols_; ++j) acc += weights_[i * cols_ + j] * state[j];
    out[i] = acc + bias_[i];
  }
  return out;
}

diff::NodeId OutputMap::apply(diff::Graph& graph, diff::NodeId state) const {
  if (graph.shape(state).size() != cols_) throw ContractViolation("OutputMap: state size mismatch");
  if (identity_) return state;
  const auto w = graph.constant(weights_, diff::Shape{rows_, cols_});
  return graph.add(graph.matvec(w, state), graph.constant(bias_));
}

double OutputMap::operator_norm() const {
  if (identity_) return 1.0;
  return nn::operator_norm(weights_, rows_, cols_).value;
}

NormEstimate operator_norm(std::span<const double> matrix, std::size_t rows, std::size_t cols,
                           std::size_t max_iterations, double tolerance) {
  if (matrix.size() != rows * cols) throw ContractViolation("operator_norm: size mismatch");
  NormEstimate out;
  if (rows == 0 || cols == 0) {
    out.converged = true;
    return out;
  }
  Rng rng(0x9e3779b97f4a7c15ULL);
  std::vector<double> v(cols);
  for (double& x : v) x = rng.uniform(0.5, 1.5);
  std::vector<double> wv(rows);
  auto normalize = [](std::vector<double>& x) {
    double n = 0.0;
    for (double e : x) n += e * e;
    n = std::sqrt(n);
    if (n > 0.0) {
      for (double& e : x) e /= n;
    }
    return n;
  };
  normalize(v);
  double sigma = 0.0;
  for (std::size_t it = 1; it <= max_iterations; ++it) {
    for (std::size_t i = 0; i < rows; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < cols; ++j) acc += matrix[i * cols + j] * v[j];
      wv[i] = acc;
    }
    std::fill(v.begin(), v.end(), 0.0);
    for (std::size_t i = 0; i < rows; ++i) {
      for (std::size_t j = 0; j < cols; ++j) v[j] += matrix[i * cols + j] * wv[i];
    }
    const double next = std::sqrt(normalize(v));
    out.iterations = it;
    if (next == 0.0) {
      // v is in the null space; W = 0 along every direction reached.
      sigma = 0.0;
      out.converged = true;
      break;
    }
    if (std::abs(next - sigma) <= tolerance * std::max(1.0, next)) {
      sigma = next;
      out.converged = true;
      break;
    }
    sigma = next;
  }
  out.value = sigma;
  return out;
}

LipschitzEstimate lipschitz_upper_bound(const ParamVector& params) {
  return lipschitz_upper_bound(params, 0, params.spec().input_size());
}

LipschitzEstimate lipschitz_upper_bound(const ParamVector& params, std::size_t first_input,
                                        std::size_t input_count) {
  if (first_input + input_count > params.spec().input_size()) {
    throw ContractViolation("lipschitz_upper_bound: input range out of bounds");
  }
  LipschitzEstimate out;
  out.bound = 1.0;
  for (std::size_t l = 0; l < params.spec().layer_count(); ++l) {
    NormEstimate n;
    if (l == 0 && (first_input != 0 || input_count != params.cols(0))) {
      std::vector<double> sub(params.rows(0) * input_count);
      const auto w = params.weights(0);
      for (std::size_t i = 0; i < params.rows(0); ++i) {
        for (std::size_t j = 0; j < input_count; ++j) sub[i * input_count + j] = w[i * params.cols(0) + first_input + j];
      }
      n = operator_norm(sub, params.rows(0), input_count);
    } else {
      n = operator_norm(params.weights(l), params.rows(l), params.cols(l));
    }
    out.bound *= n.value;
    out.converged = out.converged && n.converged;
  }
  return out;
}

double sampled_lipschitz(const ParamVector& params, Rng& rng, std::size_t pairs, double half_width) {
  const std::size_t n = params.spec().input_size();
  std::vector<double> a(n), b(n);
  double best = 0.0;
  for (std::size_t p = 0; p < pairs; ++p) {
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = rng.uniform(-half_width, half_width);
      b[i] = rng.uniform(-half_width, half_width);
    }
    const auto fa = mlp_forward(params, a);
    const auto fb = mlp_forward(params, b);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < fa.size(); ++i) num += (fa[i] - fb[i]) * (fa[i] - fb[i]);
    for (std::size_t i = 0; i < n; ++i) den += (a[i] - b[i]) * (a[i] - b[i]);
    if (den > 0.0) best = std::max(best, std::sqrt(num / den));
  }
  return best;
}

}  // namespace lyanet::nn
