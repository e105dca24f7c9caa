#include "lyanet/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>

#include "lyanet/error.hpp"
#include "lyanet/rng.hpp"

namespace lyanet::data {

void LabeledDataset::validate() const {
  if (inputs.size() != labels.size()) throw ContractViolation("dataset: inputs and labels differ in length");
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (inputs[i].size() != input_dim) {
      throw ContractViolation("dataset: row " + std::to_string(i) + " has the wrong input length");
    }
    for (double v : inputs[i]) {
      if (!std::isfinite(v)) throw ContractViolation("dataset: row " + std::to_string(i) + " is not finite");
    }
    if (labels[i] >= classes) throw ContractViolation("dataset: row " + std::to_string(i) + " label out of range");
  }
}

LabeledDataset LabeledDataset::subset(const std::vector<std::size_t>& indices) const {
  LabeledDataset out;
  out.input_dim = input_dim;
  out.classes = classes;
  out.provenance = provenance + " (subset)";
  out.inputs.reserve(indices.size());
  out.labels.reserve(indices.size());
  for (std::size_t i : indices) {
    out.inputs.push_back(inputs.at(i));
    out.labels.push_back(labels.at(i));
  }
  return out;
}

LabeledDataset gen_circles(std::size_t count, double inner_radius, double outer_radius, double noise,
                           std::uint64_t seed) {
  if (count < 2) throw ContractViolation("gen_circles: count must be at least 2");
  if (!(inner_radius < outer_radius)) throw ContractViolation("gen_circles: inner radius must be below outer");
  if (!(noise >= 0.0)) throw ContractViolation("gen_circles: noise must be nonnegative");
  Rng rng(seed);
  LabeledDataset d;
  d.input_dim = 2;
  d.classes = 2;
  d.provenance = "circles(seed=" + std::to_string(seed) + ")";
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t label = i % 2;
    const double radius = label == 0 ? inner_radius : outer_radius;
    const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
    double x = radius * std::cos(angle);
    double y = radius * std::sin(angle);
    if (noise > 0.0) {
      x += noise * rng.normal();
      y += noise * rng.normal();
    }
    d.inputs.push_back({x, y});
    d.labels.push_back(label);
  }
  return d;
}

LabeledDataset gen_blobs(std::size_t count, const std::vector<std::vector<double>>& centers, double noise,
                         std::uint64_t seed) {
  if (centers.empty()) throw ContractViolation("gen_blobs: need at least one center");
  if (count < 1) throw ContractViolation("gen_blobs: count must be positive");
  if (!(noise >= 0.0)) throw ContractViolation("gen_blobs: noise must be nonnegative");
  const std::size_t dim = centers.front().size();
  for (const auto& c : centers) {
    if (c.size() != dim || dim == 0) throw ContractViolation("gen_blobs: centers must share a positive dimension");
  }
  Rng rng(seed);
  LabeledDataset d;
  d.input_dim = dim;
  d.classes = centers.size();
  d.provenance = "blobs(seed=" + std::to_string(seed) + ")";
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t label = i % centers.size();
    std::vector<double> x = centers[label];
    if (noise > 0.0) {
      for (double& v : x) v += noise * rng.normal();
    }
    d.inputs.push_back(std::move(x));
    d.labels.push_back(label);
  }
  return d;
}

std::vector<std::array<double, 2>> grid(const std::array<AxisBounds, 2>& bounds, std::size_t resolution) {
  if (resolution < 2) throw ContractViolation("grid: resolution must be at least 2");
  auto coord = [&](const AxisBounds& b, std::size_t i) {
    const double step = (b.hi - b.lo) / static_cast<double>(resolution - 1);
    return i + 1 == resolution ? b.hi : b.lo + step * static_cast<double>(i);
  };
  std::vector<std::array<double, 2>> out;
  out.reserve(resolution * resolution);
  for (std::size_t row = 0; row < resolution; ++row) {
    for (std::size_t col = 0; col < resolution; ++col) {
      out.push_back({coord(bounds[0], col), coord(bounds[1], row)});
    }
  }
  return out;
}

std::string format_double(double value) {
  char buf[64];
  const int n = std::snprintf(buf, sizeof buf, "%.17g", value);
  return std::string(buf, static_cast<std::size_t>(n));
}

std::string csv_header(std::size_t input_dim) {
  std::string h;
  for (std::size_t i = 0; i < input_dim; ++i) h += "x_" + std::to_string(i) + ",";
  return h + "label";
}

void write_csv(std::ostream& out, const LabeledDataset& dataset) {
  dataset.validate();
  out << csv_header(dataset.input_dim) << '\n';
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    for (double v : dataset.inputs[i]) out << format_double(v) << ',';
    out << dataset.labels[i] << '\n';
  }
}

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

std::string trim(std::string s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.pop_back();
  std::size_t start = 0;
  while (start < s.size() && s[start] == ' ') ++start;
  return s.substr(start);
}

}  // namespace

LabeledDataset read_csv(std::istream& in, const std::string& source, std::size_t classes) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError(source + ": empty file, expected a header", 1);
  const auto header = split(trim(line));
  if (header.size() < 2) throw ParseError(source + ": header must name inputs and a label", 1);
  const std::size_t dim = header.size() - 1;
  if (trim(line) != csv_header(dim)) {
    throw ParseError(source + ": bad header, expected '" + csv_header(dim) + "'", 1);
  }
  LabeledDataset d;
  d.input_dim = dim;
  d.provenance = source;
  std::size_t line_no = 1;
  std::size_t max_label = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    const auto fields = split(line);
    if (fields.size() != dim + 1) {
      throw ParseError(source + ":" + std::to_string(line_no) + ": expected " + std::to_string(dim + 1) +
                           " fields, got " + std::to_string(fields.size()),
                       line_no);
    }
    std::vector<double> x(dim);
    for (std::size_t i = 0; i < dim; ++i) {
      const std::string f = trim(fields[i]);
      std::size_t used = 0;
      try {
        x[i] = std::stod(f, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || used != f.size() || !std::isfinite(x[i])) {
        throw ParseError(source + ":" + std::to_string(line_no) + ": bad number '" + f + "'", line_no);
      }
    }
    const std::string lf = trim(fields[dim]);
    std::size_t label = 0;
    const auto [ptr, ec] = std::from_chars(lf.data(), lf.data() + lf.size(), label);
    if (ec != std::errc() || ptr != lf.data() + lf.size() || lf.empty()) {
      throw ParseError(source + ":" + std::to_string(line_no) + ": bad label '" + lf + "'", line_no);
    }
    max_label = std::max(max_label, label);
    d.inputs.push_back(std::move(x));
    d.labels.push_back(label);
  }
  d.classes = classes != 0 ? classes : (d.labels.empty() ? 0 : max_label + 1);
  try {
    d.validate();
  } catch (const ContractViolation& e) {
    throw ParseError(source + ": " + e.what(), 0);
  }
  return d;
}

void save_csv(const LabeledDataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_csv(out, dataset);
}

LabeledDataset load_csv(const std::filesystem::path& path, std::size_t classes) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string(), 0);
  return read_csv(in, path.string(), classes);
}

}  // namespace lyanet::data
