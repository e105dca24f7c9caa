#pragma once

// Self-describing binary checkpoint of a trained system.
//
// All integers and doubles are little-endian regardless of host order.
//
//   magic        8 bytes  "LYANETCK"
//   version      u32      (currently 1)
//   input_dim    u32
//   state_dim    u32
//   classes      u32
//   kappa        f64
//   seed         u64
//   trainer      u32 length, then that many bytes (UTF-8)
//   dynamics     network record
//   phi          u8 present flag, then a network record if 1
//   psi          u8 kind (0 identity, 1 affine); if affine:
//                u32 rows, u32 cols, f64[rows*cols] weights, f64[rows] bias
//
// A network record is:
//   u32 width count W, u32[W] widths, u8[W-2] activations (0 relu, 1 tanh),
//   u64 init seed, u64 value count, f64[count] flat parameters.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "lyanet/nn.hpp"

namespace lyanet::nn {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  std::size_t input_dim = 0;
  std::size_t state_dim = 0;
  std::size_t classes = 0;
  double kappa = 0.0;
  std::uint64_t seed = 0;
  std::string trainer;
  ParamVector dynamics;
  std::optional<ParamVector> phi;
  OutputMap psi;
};

void write_checkpoint(std::ostream& out, const Checkpoint& checkpoint);
/// Throws ParseError on a bad magic, unknown version, truncation or an
/// inconsistent record.
Checkpoint read_checkpoint(std::istream& in);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace lyanet::nn
