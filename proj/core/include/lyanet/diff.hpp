#pragma once

// Reverse-mode automatic differentiation over dense vectors and matrices.
//
// A Graph is a tape: every builder call evaluates its node eagerly and
// appends it, so node ids are already in topological order. backward()
// sweeps the tape in reverse. All arithmetic is in double precision.
//
// Conventions:
//   * values are row-major; a vector of length n has shape (n, 1), a scalar
//     has shape (1, 1);
//   * relu'(0) is defined as 0;
//   * log_sum_exp is max-shifted, so it is finite for any finite input.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <map>
#include <span>
#include <vector>

namespace lyanet::diff {

using NodeId = std::uint32_t;
using LeafId = std::uint32_t;

enum class OpKind : std::uint8_t {
  kConstant,
  kParameter,
  kInput,
  kAdd,
  kSubtract,
  kScale,
  kMatVec,
  kRelu,
  kTanh,
  kExp,
  kLog,
  kSum,
  kDot,
  kLogSumExp,
  kConcat,
};

struct Shape {
  std::size_t rows = 0;
  std::size_t cols = 1;

  std::size_t size() const { return rows * cols; }
  bool is_scalar() const { return rows == 1 && cols == 1; }
  friend bool operator==(const Shape&, const Shape&) = default;
};

/// Gradient of a scalar root with respect to a set of leaves.
class GradientMap {
 public:
  void insert(LeafId leaf, std::vector<double> gradient);
  bool contains(LeafId leaf) const { return entries_.count(leaf) != 0; }
  const std::vector<double>& at(LeafId leaf) const;
  std::size_t size() const { return entries_.size(); }

  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

 private:
  std::map<LeafId, std::vector<double>> entries_;
};

/// Receives the adjoint of every reachable parameter or input leaf.
using LeafSink = std::function<void(LeafId, std::span<const double>)>;

class Graph {
 public:
  Graph() = default;

  NodeId constant(double value);
  NodeId constant(std::span<const double> value);
  NodeId constant(std::span<const double> value, Shape shape);
  NodeId constant(std::initializer_list<double> value) {
    return constant(std::span<const double>(value.begin(), value.size()));
  }

  /// Trainable leaf. The graph keeps a view of `value`, which must outlive it.
  NodeId parameter(LeafId leaf, std::span<const double> value, Shape shape);
  /// Differentiable input leaf. The value is copied.
  NodeId input(LeafId leaf, std::span<const double> value);

  NodeId add(NodeId a, NodeId b);
  NodeId subtract(NodeId a, NodeId b);
  NodeId scale(NodeId a, double factor);
  NodeId matvec(NodeId matrix, NodeId vector);
  NodeId relu(NodeId a);
  NodeId tanh(NodeId a);
  NodeId exp(NodeId a);
  /// Throws ContractViolation on any nonpositive entry.
  NodeId log(NodeId a);
  NodeId sum(NodeId a);
  NodeId dot(NodeId a, NodeId b);
  NodeId log_sum_exp(NodeId a);
  NodeId concat(std::span<const NodeId> parts);
  NodeId concat(std::initializer_list<NodeId> parts) {
    return concat(std::span<const NodeId>(parts.begin(), parts.size()));
  }

  std::span<const double> value(NodeId id) const;
  double scalar(NodeId id) const;
  Shape shape(NodeId id) const { return node(id).shape; }
  OpKind kind(NodeId id) const { return node(id).op; }
  std::size_t size() const { return nodes_.size(); }

  /// Exact reverse-mode gradients of a scalar root. Leaves in `wrt` that the
  /// root does not depend on get a zero gradient.
  ///
  /// Throws ContractViolation for a non-scalar root or an unknown leaf, and
  /// NumericFault (carrying the node id) if a reachable forward value is not
  /// finite.
  GradientMap backward(NodeId root, std::span<const LeafId> wrt) const;
  GradientMap backward(NodeId root, std::initializer_list<LeafId> wrt) const {
    return backward(root, std::span<const LeafId>(wrt.begin(), wrt.size()));
  }

  /// Same sweep, streaming each reachable leaf's adjoint into `sink` in
  /// descending node order. Trainers use this to accumulate straight into a
  /// flat gradient buffer.
  void backward(NodeId root, const LeafSink& sink) const;

 private:
  struct Node {
    OpKind op = OpKind::kConstant;
    Shape shape;
    NodeId a = 0;
    NodeId b = 0;
    double factor = 0.0;
    std::size_t offset = 0;           // into values_, unless external
    const double* external = nullptr;  // parameter views
    LeafId leaf = 0;
    std::uint32_t extra_begin = 0;  // concat operands in extra_
    std::uint32_t extra_count = 0;
    bool needs_grad = false;
  };

  const Node& node(NodeId id) const;
  NodeId push(Node n, std::span<const double> value);
  NodeId push_computed(Node n);
  double* mutable_value(NodeId id) { return values_.data() + nodes_[id].offset; }
  void check_leaf_unique(LeafId leaf) const;
  void sweep(NodeId root, const LeafSink& sink) const;

  std::vector<Node> nodes_;
  std::vector<double> values_;
  std::vector<NodeId> extra_;
};

/// Maps a point to a scalar graph node; used by check_gradient.
using GraphFunction = std::function<NodeId(Graph&, NodeId input)>;

/// Max over coordinates of |analytic - central difference| / max(1, |analytic|).
/// Reports, never asserts: at a kink the result may be O(1).
/// Throws NumericFault if f evaluates to NaN.
double check_gradient(const GraphFunction& f, std::span<const double> point, double step);

}  // namespace lyanet::diff
