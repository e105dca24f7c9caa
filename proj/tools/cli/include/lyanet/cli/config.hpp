#pragma once

// Run configuration for the command-line tool.
//
// Grammar, one entry per line:
//
//   line    := blank | comment | entry
//   comment := '#' anything
//   entry   := key '=' value        (whitespace around both is trimmed)
//
// Lists are comma separated; blob centers are comma-separated coordinates
// with ';' between centers. Unknown or repeated keys are errors. Every key
// has a default, so an empty file is a valid config.

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "lyanet/data.hpp"
#include "lyanet/eval.hpp"
#include "lyanet/ode.hpp"
#include "lyanet/train.hpp"

namespace lyanet::cli {

enum class DatasetKind : std::uint8_t { kCircles, kBlobs, kCsv };

struct RunConfig {
  train::TrainConfig train = default_train();

  std::vector<std::size_t> hidden_widths{64, 64};
  nn::Activation activation = nn::Activation::kTanh;
  bool learnable_phi = false;
  std::uint64_t model_seed = 7;

  DatasetKind dataset = DatasetKind::kCircles;
  std::string dataset_path;
  std::size_t dataset_count = 1000;
  double dataset_noise = 0.1;
  std::uint64_t dataset_seed = 7;
  std::array<double, 2> circle_radii{1.0, 2.0};
  std::vector<std::vector<double>> blob_centers{{-1.0, -1.0}, {1.0, 1.0}};

  std::string output_dir = "out";

  ode::Solver eval_solver = ode::Solver::kRk4;
  std::size_t eval_steps = 32;

  eval::Norm attack_norm = eval::Norm::kLinf;
  double attack_epsilon = 0.1;
  std::size_t attack_steps = 10;
  /// epsilon / 4 when absent.
  std::optional<double> attack_step_size;

  std::array<double, 2> portrait_bounds{-2.5, 2.5};
  std::size_t portrait_resolution = 20;

  static train::TrainConfig default_train();
};

/// Throws ParseError (with the line number) on bad syntax, an unknown or
/// repeated key, or a value that does not parse or violates its range.
RunConfig parse_config(std::istream& in);
RunConfig load_config(const std::filesystem::path& path);

/// Every key with its resolved value; parses back to an identical config.
void write_config(std::ostream& out, const RunConfig& config);

/// Builds the dataset described by the config.
data::LabeledDataset make_dataset(const RunConfig& config);
/// Fresh system for the config's architecture.
ode::OdeSystem make_system(const RunConfig& config, std::size_t input_dim, std::size_t classes);

}  // namespace lyanet::cli
