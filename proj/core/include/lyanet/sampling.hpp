#pragma once

// Measures on the state space and on time used by Monte Carlo training.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "lyanet/nn.hpp"
#include "lyanet/rng.hpp"

namespace lyanet::sampling {

/// Half-width s of the hypercube H = [-s, s]^k whose class corner
/// (+s on the class, -s elsewhere) has cross entropy exactly e^{-kappa}.
///
/// Solved by bisection on [1e-6, 100] to absolute tolerance 1e-10. For
/// psi = identity and two classes the corner loss is log(1 + e^{-2s}).
/// Throws InfeasibleRadius when the bracket holds no sign change, e.g. when
/// e^{-kappa} >= log(m).
double hypercube_halfwidth(const nn::OutputMap& psi, double kappa, std::size_t classes);

/// Each coordinate i.i.d. uniform on [-s, s].
std::vector<double> sample_state_hypercube(double s, std::size_t dim, Rng& rng);

/// r * u with r ~ U(0, r_max) and u uniform on the unit sphere (a normalized
/// standard Gaussian vector). Concentrates samples near the origin.
std::vector<double> sample_state_ball(double r_max, std::size_t dim, Rng& rng);

/// Uniform on [0, 1].
double sample_time(Rng& rng);

enum class SamplerKind : std::uint8_t { kHypercube, kBall };

const char* to_string(SamplerKind kind);
/// "hypercube" or "ball".
SamplerKind parse_sampler(const std::string& name);

/// Hypercube up to 16 state dimensions, biased ball above.
SamplerKind default_sampler(std::size_t state_dim);

struct StateSampler {
  SamplerKind kind = SamplerKind::kHypercube;
  /// Hypercube half-width s, or ball radius r_max (= s, inscribed in the cube).
  double radius = 1.0;
  std::size_t dim = 0;

  std::vector<double> sample(Rng& rng) const;
};

}  // namespace lyanet::sampling
