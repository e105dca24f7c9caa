#include "lyanet/diff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "lyanet/error.hpp"

namespace lyanet::diff {

void GradientMap::insert(LeafId leaf, std::vector<double> gradient) {
  if (!entries_.emplace(leaf, std::move(gradient)).second) {
    throw ContractViolation("GradientMap: leaf " + std::to_string(leaf) + " inserted twice");
  }
}

const std::vector<double>& GradientMap::at(LeafId leaf) const {
  auto it = entries_.find(leaf);
  if (it == entries_.end()) {
    throw ContractViolation("GradientMap: no gradient for leaf " + std::to_string(leaf));
  }
  return it->second;
}

const Graph::Node& Graph::node(NodeId id) const {
  if (id >= nodes_.size()) {
    throw ContractViolation("diff: node id " + std::to_string(id) + " out of range");
  }
  return nodes_[id];
}

NodeId Graph::push(Node n, std::span<const double> value) {
  if (value.size() != n.shape.size()) {
    throw ContractViolation("diff: value size does not match shape");
  }
  n.offset = values_.size();
  values_.insert(values_.end(), value.begin(), value.end());
  nodes_.push_back(n);
  return static_cast<NodeId>(nodes_.size() - 1);
}

NodeId Graph::push_computed(Node n) {
  n.offset = values_.size();
  values_.resize(values_.size() + n.shape.size());
  nodes_.push_back(n);
  return static_cast<NodeId>(nodes_.size() - 1);
}

std::span<const double> Graph::value(NodeId id) const {
  const Node& n = node(id);
  const double* data = n.external != nullptr ? n.external : values_.data() + n.offset;
  return {data, n.shape.size()};
}

double Graph::scalar(NodeId id) const {
  if (!node(id).shape.is_scalar()) throw ContractViolation("diff: node is not scalar");
  return value(id)[0];
}

void Graph::check_leaf_unique(LeafId leaf) const {
  for (const Node& n : nodes_) {
    if ((n.op == OpKind::kParameter || n.op == OpKind::kInput) && n.leaf == leaf) {
      throw ContractViolation("diff: leaf id " + std::to_string(leaf) + " already used in graph");
    }
  }
}

NodeId Graph::constant(double value) { return constant(std::span<const double>(&value, 1)); }

NodeId Graph::constant(std::span<const double> value) {
  return constant(value, Shape{value.size(), 1});
}

NodeId Graph::constant(std::span<const double> value, Shape shape) {
  Node n;
  n.op = OpKind::kConstant;
  n.shape = shape;
  return push(n, value);
}

NodeId Graph::parameter(LeafId leaf, std::span<const double> value, Shape shape) {
  if (value.size() != shape.size()) throw ContractViolation("diff: parameter size does not match shape");
  check_leaf_unique(leaf);
  Node n;
  n.op = OpKind::kParameter;
  n.shape = shape;
  n.leaf = leaf;
  n.external = value.data();
  n.needs_grad = true;
  nodes_.push_back(n);
  return static_cast<NodeId>(nodes_.size() - 1);
}

NodeId Graph::input(LeafId leaf, std::span<const double> value) {
  check_leaf_unique(leaf);
  Node n;
  n.op = OpKind::kInput;
  n.shape = Shape{value.size(), 1};
  n.leaf = leaf;
  n.needs_grad = true;
  return push(n, value);
}

namespace {

Shape require_same(Shape a, Shape b, const char* op) {
  if (!(a == b)) throw ContractViolation(std::string("diff: shape mismatch in ") + op);
  return a;
}

}  // namespace

NodeId Graph::add(NodeId a, NodeId b) {
  Node n;
  n.op = OpKind::kAdd;
  n.shape = require_same(node(a).shape, node(b).shape, "add");
  n.a = a;
  n.b = b;
  n.needs_grad = node(a).needs_grad || node(b).needs_grad;
  const NodeId id = push_computed(n);
  const double* x = value(a).data();
  const double* y = value(b).data();
  double* out = mutable_value(id);
  for (std::size_t i = 0; i < n.shape.size(); ++i) out[i] = x[i] + y[i];
  return id;
}

NodeId Graph::subtract(NodeId a, NodeId b) {
  Node n;
  n.op = OpKind::kSubtract;
  n.shape = require_same(node(a).shape, node(b).shape, "subtract");
  n.a = a;
  n.b = b;
  n.needs_grad = node(a).needs_grad || node(b).needs_grad;
  const NodeId id = push_computed(n);
  const double* x = value(a).data();
  const double* y = value(b).data();
  double* out = mutable_value(id);
  for (std::size_t i = 0; i < n.shape.size(); ++i) out[i] = x[i] - y[i];
  return id;
}

NodeId Graph::scale(NodeId a, double factor) {
  Node n;
  n.op = OpKind::kScale;
  n.shape = node(a).shape;
  n.a = a;
  n.factor = factor;
  n.needs_grad = node(a).needs_grad;
  const NodeId id = push_computed(n);
  const double* x = value(a).data();
  double* out = mutable_value(id);
  for (std::size_t i = 0; i < n.shape.size(); ++i) out[i] = factor * x[i];
  return id;
}

NodeId Graph::matvec(NodeId matrix, NodeId vector) {
  const Shape ms = node(matrix).shape;
  const Shape vs = node(vector).shape;
  if (vs.cols != 1 || vs.rows != ms.cols) throw ContractViolation("diff: shape mismatch in matvec");
  Node n;
  n.op = OpKind::kMatVec;
  n.shape = Shape{ms.rows, 1};
  n.a = matrix;
  n.b = vector;
  n.needs_grad = node(matrix).needs_grad || node(vector).needs_grad;
  const NodeId id = push_computed(n);
  const double* w = value(matrix).data();
  const double* v = value(vector).data();
  double* out = mutable_value(id);
  for (std::size_t i = 0; i < ms.rows; ++i) {
    const double* row = w + i * ms.cols;
    double acc = 0.0;
    for (std::size_t j = 0; j < ms.cols; ++j) acc += row[j] * v[j];
    out[i] = acc;
  }
  return id;
}

namespace {

template <typename Fn>
void map_into(std::span<const double> in, double* out, Fn fn) {
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = fn(in[i]);
}

}  // namespace

NodeId Graph::relu(NodeId a) {
  Node n;
  n.op = OpKind::kRelu;
  n.shape = node(a).shape;
  n.a = a;
  n.needs_grad = node(a).needs_grad;
  const NodeId id = push_computed(n);
  map_into(value(a), mutable_value(id), [](double x) { return x > 0.0 ? x : 0.0; });
  return id;
}

NodeId Graph::tanh(NodeId a) {
  Node n;
  n.op = OpKind::kTanh;
  n.shape = node(a).shape;
  n.a = a;
  n.needs_grad = node(a).needs_grad;
  const NodeId id = push_computed(n);
  map_into(value(a), mutable_value(id), [](double x) { return std::tanh(x); });
  return id;
}

NodeId Graph::exp(NodeId a) {
  Node n;
  n.op = OpKind::kExp;
  n.shape = node(a).shape;
  n.a = a;
  n.needs_grad = node(a).needs_grad;
  const NodeId id = push_computed(n);
  map_into(value(a), mutable_value(id), [](double x) { return std::exp(x); });
  return id;
}

NodeId Graph::log(NodeId a) {
  for (double x : value(a)) {
    if (!(x > 0.0)) throw ContractViolation("diff: log of a nonpositive value");
  }
  Node n;
  n.op = OpKind::kLog;
  n.shape = node(a).shape;
  n.a = a;
  n.needs_grad = node(a).needs_grad;
  const NodeId id = push_computed(n);
  map_into(value(a), mutable_value(id), [](double x) { return std::log(x); });
  return id;
}

NodeId Graph::sum(NodeId a) {
  Node n;
  n.op = OpKind::kSum;
  n.shape = Shape{1, 1};
  n.a = a;
  n.needs_grad = node(a).needs_grad;
  const NodeId id = push_computed(n);
  double acc = 0.0;
  for (double x : value(a)) acc += x;
  *mutable_value(id) = acc;
  return id;
}

NodeId Graph::dot(NodeId a, NodeId b) {
  if (node(a).shape.size() != node(b).shape.size()) throw ContractViolation("diff: shape mismatch in dot");
  Node n;
  n.op = OpKind::kDot;
  n.shape = Shape{1, 1};
  n.a = a;
  n.b = b;
  n.needs_grad = node(a).needs_grad || node(b).needs_grad;
  const NodeId id = push_computed(n);
  const auto x = value(a);
  const auto y = value(b);
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) acc += x[i] * y[i];
  *mutable_value(id) = acc;
  return id;
}

NodeId Graph::log_sum_exp(NodeId a) {
  if (node(a).shape.size() == 0) throw ContractViolation("diff: log_sum_exp of an empty vector");
  Node n;
  n.op = OpKind::kLogSumExp;
  n.shape = Shape{1, 1};
  n.a = a;
  n.needs_grad = node(a).needs_grad;
  const NodeId id = push_computed(n);
  const auto x = value(a);
  const double top = *std::max_element(x.begin(), x.end());
  double acc = 0.0;
  for (double v : x) acc += std::exp(v - top);
  *mutable_value(id) = top + std::log(acc);
  return id;
}

NodeId Graph::concat(std::span<const NodeId> parts) {
  if (parts.empty()) throw ContractViolation("diff: concat of nothing");
  Node n;
  n.op = OpKind::kConcat;
  std::size_t total = 0;
  for (NodeId p : parts) {
    if (node(p).shape.cols != 1) throw ContractViolation("diff: concat expects vectors");
    total += node(p).shape.rows;
    n.needs_grad = n.needs_grad || node(p).needs_grad;
  }
  n.shape = Shape{total, 1};
  n.extra_begin = static_cast<std::uint32_t>(extra_.size());
  n.extra_count = static_cast<std::uint32_t>(parts.size());
  extra_.insert(extra_.end(), parts.begin(), parts.end());
  const NodeId id = push_computed(n);
  double* out = mutable_value(id);
  for (NodeId p : parts) {
    const auto v = value(p);
    out = std::copy(v.begin(), v.end(), out);
  }
  return id;
}

void Graph::sweep(NodeId root, const LeafSink& sink) const {
  if (!node(root).shape.is_scalar()) throw ContractViolation("diff: backward needs a scalar root");

  const std::size_t count = static_cast<std::size_t>(root) + 1;
  std::vector<char> reachable(count, 0);
  reachable[root] = 1;
  auto mark = [&](NodeId operand) { reachable[operand] = 1; };
  for (std::size_t id = count; id-- > 0;) {
    if (!reachable[id]) continue;
    const Node& n = nodes_[id];
    for (double v : value(static_cast<NodeId>(id))) {
      if (!std::isfinite(v)) {
        throw NumericFault("diff: non-finite forward value at node " + std::to_string(id), id);
      }
    }
    switch (n.op) {
      case OpKind::kConstant:
      case OpKind::kParameter:
      case OpKind::kInput:
        break;
      case OpKind::kAdd:
      case OpKind::kSubtract:
      case OpKind::kMatVec:
      case OpKind::kDot:
        mark(n.a);
        mark(n.b);
        break;
      case OpKind::kConcat:
        for (std::uint32_t k = 0; k < n.extra_count; ++k) mark(extra_[n.extra_begin + k]);
        break;
      default:
        mark(n.a);
        break;
    }
  }

  constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> adj_offset(count, kNone);
  std::size_t total = 0;
  for (std::size_t id = 0; id < count; ++id) {
    if (reachable[id] && nodes_[id].needs_grad) {
      adj_offset[id] = total;
      total += nodes_[id].shape.size();
    }
  }
  if (!nodes_[root].needs_grad) return;

  std::vector<double> adjoint(total, 0.0);
  auto adj = [&](NodeId id) -> double* {
    return adj_offset[id] == kNone ? nullptr : adjoint.data() + adj_offset[id];
  };
  adjoint[adj_offset[root]] = 1.0;

  for (std::size_t id = count; id-- > 0;) {
    if (adj_offset[id] == kNone) continue;
    const Node& n = nodes_[id];
    const double* g = adjoint.data() + adj_offset[id];
    const std::size_t size = n.shape.size();
    switch (n.op) {
      case OpKind::kConstant:
        break;
      case OpKind::kParameter:
      case OpKind::kInput:
        sink(n.leaf, std::span<const double>(g, size));
        break;
      case OpKind::kAdd:
      case OpKind::kSubtract: {
        if (double* da = adj(n.a)) {
          for (std::size_t i = 0; i < size; ++i) da[i] += g[i];
        }
        if (double* db = adj(n.b)) {
          const double sign = n.op == OpKind::kAdd ? 1.0 : -1.0;
          for (std::size_t i = 0; i < size; ++i) db[i] += sign * g[i];
        }
        break;
      }
      case OpKind::kScale: {
        if (double* da = adj(n.a)) {
          for (std::size_t i = 0; i < size; ++i) da[i] += n.factor * g[i];
        }
        break;
      }
      case OpKind::kMatVec: {
        const Shape ms = nodes_[n.a].shape;
        const double* w = value(n.a).data();
        const double* v = value(n.b).data();
        if (double* dw = adj(n.a)) {
          for (std::size_t i = 0; i < ms.rows; ++i) {
            const double gi = g[i];
            double* row = dw + i * ms.cols;
            for (std::size_t j = 0; j < ms.cols; ++j) row[j] += gi * v[j];
          }
        }
        if (double* dv = adj(n.b)) {
          for (std::size_t i = 0; i < ms.rows; ++i) {
            const double gi = g[i];
            const double* row = w + i * ms.cols;
            for (std::size_t j = 0; j < ms.cols; ++j) dv[j] += row[j] * gi;
          }
        }
        break;
      }
      case OpKind::kRelu: {
        const double* x = value(n.a).data();
        double* da = adj(n.a);
        for (std::size_t i = 0; i < size; ++i) {
          if (x[i] > 0.0) da[i] += g[i];
        }
        break;
      }
      case OpKind::kTanh: {
        const double* y = value(static_cast<NodeId>(id)).data();
        double* da = adj(n.a);
        for (std::size_t i = 0; i < size; ++i) da[i] += g[i] * (1.0 - y[i] * y[i]);
        break;
      }
      case OpKind::kExp: {
        const double* y = value(static_cast<NodeId>(id)).data();
        double* da = adj(n.a);
        for (std::size_t i = 0; i < size; ++i) da[i] += g[i] * y[i];
        break;
      }
      case OpKind::kLog: {
        const double* x = value(n.a).data();
        double* da = adj(n.a);
        for (std::size_t i = 0; i < size; ++i) da[i] += g[i] / x[i];
        break;
      }
      case OpKind::kSum: {
        double* da = adj(n.a);
        const std::size_t m = nodes_[n.a].shape.size();
        for (std::size_t i = 0; i < m; ++i) da[i] += g[0];
        break;
      }
      case OpKind::kDot: {
        const auto x = value(n.a);
        const auto y = value(n.b);
        if (double* da = adj(n.a)) {
          for (std::size_t i = 0; i < x.size(); ++i) da[i] += g[0] * y[i];
        }
        if (double* db = adj(n.b)) {
          for (std::size_t i = 0; i < x.size(); ++i) db[i] += g[0] * x[i];
        }
        break;
      }
      case OpKind::kLogSumExp: {
        const auto x = value(n.a);
        const double y = value(static_cast<NodeId>(id))[0];
        double* da = adj(n.a);
        for (std::size_t i = 0; i < x.size(); ++i) da[i] += g[0] * std::exp(x[i] - y);
        break;
      }
      case OpKind::kConcat: {
        std::size_t pos = 0;
        for (std::uint32_t k = 0; k < n.extra_count; ++k) {
          const NodeId part = extra_[n.extra_begin + k];
          const std::size_t len = nodes_[part].shape.size();
          if (double* dp = adj(part)) {
            for (std::size_t i = 0; i < len; ++i) dp[i] += g[pos + i];
          }
          pos += len;
        }
        break;
      }
    }
  }
}

void Graph::backward(NodeId root, const LeafSink& sink) const { sweep(root, sink); }

GradientMap Graph::backward(NodeId root, std::span<const LeafId> wrt) const {
  std::map<LeafId, NodeId> leaf_nodes;
  for (std::size_t id = 0; id < nodes_.size(); ++id) {
    const Node& n = nodes_[id];
    if (n.op == OpKind::kParameter || n.op == OpKind::kInput) leaf_nodes[n.leaf] = static_cast<NodeId>(id);
  }
  std::map<LeafId, std::vector<double>> collected;
  for (LeafId leaf : wrt) {
    auto it = leaf_nodes.find(leaf);
    if (it == leaf_nodes.end()) throw ContractViolation("diff: unknown leaf " + std::to_string(leaf));
    collected[leaf].assign(nodes_[it->second].shape.size(), 0.0);
  }
  sweep(root, [&](LeafId leaf, std::span<const double> g) {
    auto it = collected.find(leaf);
    if (it != collected.end()) std::copy(g.begin(), g.end(), it->second.begin());
  });
  GradientMap out;
  for (auto& [leaf, grad] : collected) out.insert(leaf, std::move(grad));
  return out;
}

double check_gradient(const GraphFunction& f, std::span<const double> point, double step) {
  if (!(step > 0.0)) throw ContractViolation("check_gradient: step must be positive");
  constexpr LeafId kLeaf = 0;
  Graph graph;
  const NodeId in = graph.input(kLeaf, point);
  const NodeId root = f(graph, in);
  if (std::isnan(graph.scalar(root))) throw NumericFault("check_gradient: f returned NaN", root);
  const std::vector<double> analytic = graph.backward(root, {kLeaf}).at(kLeaf);

  auto evaluate = [&](std::span<const double> x) {
    Graph g;
    const NodeId r = f(g, g.input(kLeaf, x));
    const double v = g.scalar(r);
    if (std::isnan(v)) throw NumericFault("check_gradient: f returned NaN", r);
    return v;
  };

  std::vector<double> probe(point.begin(), point.end());
  double worst = 0.0;
  for (std::size_t i = 0; i < probe.size(); ++i) {
    const double saved = probe[i];
    probe[i] = saved + step;
    const double up = evaluate(probe);
    probe[i] = saved - step;
    const double down = evaluate(probe);
    probe[i] = saved;
    const double numeric = (up - down) / (2.0 * step);
    worst = std::max(worst, std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(analytic[i])));
  }
  return worst;
}

}  // namespace lyanet::diff
