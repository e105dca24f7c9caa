#pragma once

// Independent reference computations for the test suite. Nothing here calls
// into the library's numerics.

#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "lyanet/nn.hpp"

namespace oracle {

inline std::vector<double> central_difference(const std::function<double(std::span<const double>)>& f,
                                              std::span<const double> point, double h = 1e-5) {
  std::vector<double> x(point.begin(), point.end());
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + h;
    const double up = f(x);
    x[i] = saved - h;
    const double down = f(x);
    x[i] = saved;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

inline double max_relative_error(std::span<const double> analytic, std::span<const double> numeric) {
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    worst = std::fmax(worst, std::fabs(analytic[i] - numeric[i]) / std::fmax(1.0, std::fabs(analytic[i])));
  }
  return worst;
}

/// Straight-line MLP evaluation over the documented flat layout: per layer,
/// row-major weights then bias.
inline std::vector<double> mlp(const lyanet::nn::ParamVector& params, std::span<const double> input) {
  const auto& spec = params.spec();
  const auto flat = params.flat();
  std::vector<double> a(input.begin(), input.end());
  std::size_t offset = 0;
  for (std::size_t l = 0; l + 1 < spec.widths.size(); ++l) {
    const std::size_t in = spec.widths[l];
    const std::size_t out = spec.widths[l + 1];
    std::vector<double> z(out);
    for (std::size_t r = 0; r < out; ++r) {
      double acc = 0.0;
      for (std::size_t c = 0; c < in; ++c) acc += flat[offset + r * in + c] * a[c];
      z[r] = acc + flat[offset + in * out + r];
    }
    offset += in * out + out;
    if (l + 2 < spec.widths.size()) {
      for (double& v : z) v = spec.activations[l] == lyanet::nn::Activation::kTanh ? std::tanh(v) : std::fmax(0.0, v);
    }
    a = std::move(z);
  }
  return a;
}

inline double cross_entropy(std::span<const double> logits, std::size_t label) {
  double total = 0.0;
  for (double z : logits) total += std::exp(z);
  return std::log(total) - logits[label];
}

inline double norm2(std::span<const double> v) {
  double acc = 0.0;
  for (double e : v) acc += e * e;
  return std::sqrt(acc);
}

}  // namespace oracle
