#include "lyanet/potential.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>

#include "lyanet/error.hpp"

namespace lyanet::potential {

std::vector<double> softmax(std::span<const double> logits) {
  if (logits.empty()) throw ContractViolation("softmax: empty logits");
  const double top = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) total += (p[i] = std::exp(logits[i] - top));
  for (double& v : p) v /= total;
  return p;
}

double log_sum_exp(std::span<const double> logits) {
  if (logits.empty()) throw ContractViolation("log_sum_exp: empty logits");
  const double top = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (double v : logits) total += std::exp(v - top);
  return top + std::log(total);
}

double cross_entropy(std::span<const double> logits, std::size_t label) {
  if (label >= logits.size()) throw ContractViolation("cross_entropy: label out of range");
  return log_sum_exp(logits) - logits[label];
}

double truncated_cross_entropy(std::span<const double> logits, std::size_t label, double gamma) {
  if (!(gamma >= 0.0)) throw ContractViolation("truncated_cross_entropy: gamma must be nonnegative");
  return std::max(0.0, cross_entropy(logits, label) - gamma);
}

diff::NodeId cross_entropy(diff::Graph& graph, diff::NodeId logits, std::size_t label) {
  const std::size_t m = graph.shape(logits).size();
  if (label >= m) throw ContractViolation("cross_entropy: label out of range");
  std::vector<double> onehot(m, 0.0);
  onehot[label] = 1.0;
  return graph.subtract(graph.log_sum_exp(logits), graph.dot(graph.constant(onehot), logits));
}

std::vector<double> Potential::gradient(std::span<const double> eta) const {
  diff::Graph graph;
  const auto in = graph.input(0, eta);
  return graph.backward(node(graph, in), {0}).at(0);
}

CrossEntropyPotential::CrossEntropyPotential(nn::OutputMap psi, std::size_t label, double gamma)
    : psi_(std::move(psi)), label_(label), gamma_(gamma) {
  if (!(gamma >= 0.0)) throw ContractViolation("CrossEntropyPotential: gamma must be nonnegative");
  if (label >= psi_.output_dim()) throw ContractViolation("CrossEntropyPotential: label out of range");
}

double CrossEntropyPotential::value(std::span<const double> eta) const {
  return truncated_cross_entropy(psi_.apply(eta), label_, gamma_);
}

diff::NodeId CrossEntropyPotential::node(diff::Graph& graph, diff::NodeId eta) const {
  const auto ce = cross_entropy(graph, psi_.apply(graph, eta), label_);
  if (gamma_ == 0.0) return graph.relu(ce);
  return graph.relu(graph.subtract(ce, graph.constant(gamma_)));
}

std::vector<double> CrossEntropyPotential::gradient(std::span<const double> eta) const {
  if (value(eta) <= 0.0) return std::vector<double>(eta.size(), 0.0);
  return Potential::gradient(eta);
}

double QuadraticPotential::value(std::span<const double> eta) const {
  double acc = 0.0;
  for (double v : eta) acc += v * v;
  return 0.5 * acc;
}

diff::NodeId QuadraticPotential::node(diff::Graph& graph, diff::NodeId eta) const {
  return graph.scale(graph.dot(eta, eta), 0.5);
}

std::vector<double> QuadraticPotential::gradient(std::span<const double> eta) const {
  return {eta.begin(), eta.end()};
}

std::vector<double> hypercube_corner(std::size_t classes, std::size_t label, double s) {
  if (label >= classes) throw ContractViolation("hypercube_corner: label out of range");
  std::vector<double> corner(classes, -s);
  corner[label] = s;
  return corner;
}

ProjectionBounds projection_bounds_estimate(const Potential& potential, std::span<const std::vector<double>> states,
                                            std::span<const double> reference) {
  ProjectionBounds out;
  out.reference.assign(reference.begin(), reference.end());
  out.sigma_lo = std::numeric_limits<double>::infinity();
  out.sigma_hi = 0.0;
  std::size_t used = 0;
  for (const auto& eta : states) {
    if (eta.size() != reference.size()) throw ContractViolation("projection_bounds_estimate: dimension mismatch");
    double dist = 0.0;
    for (std::size_t i = 0; i < eta.size(); ++i) dist += (eta[i] - reference[i]) * (eta[i] - reference[i]);
    dist = std::sqrt(dist);
    if (dist == 0.0) {
      ++out.excluded;
      continue;
    }
    const double ratio = potential.value(eta) / dist;
    out.sigma_lo = std::min(out.sigma_lo, ratio);
    out.sigma_hi = std::max(out.sigma_hi, ratio);
    ++used;
  }
  if (out.excluded > 0) {
    std::clog << "warning: projection_bounds_estimate skipped " << out.excluded
              << " sample point(s) equal to the reference state\n";
  }
  if (used == 0) throw ContractViolation("projection_bounds_estimate: no usable sample points");
  return out;
}

}  // namespace lyanet::potential
