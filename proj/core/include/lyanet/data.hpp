#pragma once

// Labeled toy datasets, input grids, and the CSV format shared by datasets
// and grid exports.
//
// CSV schema: header `x_0,...,x_{n-1},label`, one example per row, inputs
// written with 17 significant digits and labels as integers.

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace lyanet::data {

struct LabeledDataset {
  std::vector<std::vector<double>> inputs;
  std::vector<std::size_t> labels;
  std::size_t input_dim = 0;
  std::size_t classes = 0;
  /// Generator name and seed, or the source file path.
  std::string provenance;

  std::size_t size() const { return inputs.size(); }
  bool empty() const { return inputs.empty(); }
  /// Throws ContractViolation if lengths differ, a label is out of range, or
  /// an input has the wrong length or a non-finite entry.
  void validate() const;
  /// Rows at `indices`, in that order.
  LabeledDataset subset(const std::vector<std::size_t>& indices) const;
};

/// Two concentric rings; label = ring index (0 inner, 1 outer). Points sit at
/// uniform angles on their ring plus isotropic Gaussian noise of std `noise`.
/// Even indices are inner, odd indices outer.
LabeledDataset gen_circles(std::size_t count, double inner_radius, double outer_radius, double noise,
                           std::uint64_t seed);

/// Gaussian clusters, one class per center, assigned round-robin.
LabeledDataset gen_blobs(std::size_t count, const std::vector<std::vector<double>>& centers, double noise,
                         std::uint64_t seed);

struct AxisBounds {
  double lo = 0.0;
  double hi = 1.0;
};

/// resolution x resolution lattice covering both axes inclusively. Row-major:
/// the second coordinate is the row, the first varies fastest.
std::vector<std::array<double, 2>> grid(const std::array<AxisBounds, 2>& bounds, std::size_t resolution);

std::string csv_header(std::size_t input_dim);

void write_csv(std::ostream& out, const LabeledDataset& dataset);
/// classes = max label + 1 unless `classes` is nonzero.
LabeledDataset read_csv(std::istream& in, const std::string& source = "<stream>", std::size_t classes = 0);

void save_csv(const LabeledDataset& dataset, const std::filesystem::path& path);
LabeledDataset load_csv(const std::filesystem::path& path, std::size_t classes = 0);

/// Formats a double so that it parses back to the same value.
std::string format_double(double value);

}  // namespace lyanet::data
