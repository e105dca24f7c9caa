#include "lyanet/sampling.hpp"

#include <cmath>

#include "lyanet/error.hpp"
#include "lyanet/potential.hpp"

namespace lyanet::sampling {

double hypercube_halfwidth(const nn::OutputMap& psi, double kappa, std::size_t classes) {
  if (!(kappa > 0.0)) throw ContractViolation("hypercube_halfwidth: kappa must be positive");
  if (classes < 2) throw ContractViolation("hypercube_halfwidth: need at least two classes");
  if (psi.input_dim() != classes || psi.output_dim() != classes) {
    throw ContractViolation("hypercube_halfwidth: corner construction needs a square output map over the classes");
  }
  const double target = std::exp(-kappa);
  auto excess = [&](double s) {
    return potential::cross_entropy(psi.apply(potential::hypercube_corner(classes, 0, s)), 0) - target;
  };
  double lo = 1e-6;
  double hi = 100.0;
  double f_lo = excess(lo);
  const double f_hi = excess(hi);
  if (f_lo == 0.0) return lo;
  if (f_hi == 0.0) return hi;
  if ((f_lo > 0.0) == (f_hi > 0.0)) {
    throw InfeasibleRadius("hypercube_halfwidth: corner loss never reaches e^{-kappa} on [1e-6, 100]");
  }
  while (hi - lo > 1e-10) {
    const double mid = 0.5 * (lo + hi);
    const double f_mid = excess(mid);
    if (f_mid == 0.0) return mid;
    if ((f_mid > 0.0) == (f_lo > 0.0)) {
      lo = mid;
      f_lo = f_mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

std::vector<double> sample_state_hypercube(double s, std::size_t dim, Rng& rng) {
  if (!(s > 0.0)) throw ContractViolation("sample_state_hypercube: half-width must be positive");
  std::vector<double> eta(dim);
  for (double& v : eta) v = rng.uniform(-s, s);
  return eta;
}

std::vector<double> sample_state_ball(double r_max, std::size_t dim, Rng& rng) {
  if (!(r_max > 0.0)) throw ContractViolation("sample_state_ball: radius must be positive");
  if (dim < 1) throw ContractViolation("sample_state_ball: dimension must be positive");
  const double r = rng.uniform(0.0, r_max);
  std::vector<double> u(dim);
  double norm = 0.0;
  do {
    norm = 0.0;
    for (double& v : u) {
      v = rng.normal();
      norm += v * v;
    }
  } while (norm == 0.0);
  norm = std::sqrt(norm);
  for (double& v : u) v = r * (v / norm);
  return u;
}

double sample_time(Rng& rng) { return rng.uniform(); }

const char* to_string(SamplerKind kind) { return kind == SamplerKind::kHypercube ? "hypercube" : "ball"; }

SamplerKind parse_sampler(const std::string& name) {
  if (name == "hypercube") return SamplerKind::kHypercube;
  if (name == "ball") return SamplerKind::kBall;
  throw ContractViolation("unknown sampler '" + name + "' (expected hypercube or ball)");
}

SamplerKind default_sampler(std::size_t state_dim) {
  return state_dim <= 16 ? SamplerKind::kHypercube : SamplerKind::kBall;
}

std::vector<double> StateSampler::sample(Rng& rng) const {
  return kind == SamplerKind::kHypercube ? sample_state_hypercube(radius, dim, rng)
                                         : sample_state_ball(radius, dim, rng);
}

}  // namespace lyanet::sampling
