#include "lyanet/cli/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "lyanet/error.hpp"

namespace lyanet::cli {
namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string part;
  std::istringstream in(s);
  while (std::getline(in, part, sep)) parts.push_back(trim(part));
  if (!s.empty() && s.back() == sep) parts.emplace_back();
  return parts;
}

double to_double(const std::string& s) {
  double v = 0.0;
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size() || s.empty()) {
    throw ContractViolation("expected a number, got '" + s + "'");
  }
  return v;
}

std::uint64_t to_unsigned(const std::string& s) {
  std::uint64_t v = 0;
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size() || s.empty()) {
    throw ContractViolation("expected a nonnegative integer, got '" + s + "'");
  }
  return v;
}

bool to_bool(const std::string& s) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw ContractViolation("expected true or false, got '" + s + "'");
}

std::vector<double> to_doubles(const std::string& s) {
  std::vector<double> out;
  for (const auto& p : split(s, ',')) out.push_back(to_double(p));
  return out;
}

std::array<double, 2> to_pair(const std::string& s) {
  const auto v = to_doubles(s);
  if (v.size() != 2) throw ContractViolation("expected two comma-separated numbers, got '" + s + "'");
  return {v[0], v[1]};
}

std::string fmt(double v) { return data::format_double(v); }

template <typename T>
std::string join(const std::vector<T>& values, const std::function<std::string(const T&)>& f, const char* sep) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += sep;
    out += f(values[i]);
  }
  return out;
}

const char* dataset_name(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::kCircles: return "circles";
    case DatasetKind::kBlobs: return "blobs";
    case DatasetKind::kCsv: return "csv";
  }
  return "?";
}

using Setter = std::function<void(RunConfig&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"trainer", [](RunConfig& c, const std::string& v) { c.train.trainer = train::parse_trainer(v); }},
      {"kappa", [](RunConfig& c, const std::string& v) { c.train.kappa = to_double(v); }},
      {"kappa_d",
       [](RunConfig& c, const std::string& v) {
         c.train.kappa_d = v == "auto" ? std::nullopt : std::optional<double>(to_double(v));
       }},
      {"samples", [](RunConfig& c, const std::string& v) { c.train.samples = to_unsigned(v); }},
      {"steps", [](RunConfig& c, const std::string& v) { c.train.steps = to_unsigned(v); }},
      {"solver", [](RunConfig& c, const std::string& v) { c.train.solver = ode::parse_solver(v); }},
      {"learning_rate", [](RunConfig& c, const std::string& v) { c.train.learning_rate = to_double(v); }},
      {"iterations", [](RunConfig& c, const std::string& v) { c.train.iterations = to_unsigned(v); }},
      {"batch_size", [](RunConfig& c, const std::string& v) { c.train.batch_size = to_unsigned(v); }},
      {"seed", [](RunConfig& c, const std::string& v) { c.train.seed = to_unsigned(v); }},
      {"optimizer", [](RunConfig& c, const std::string& v) { c.train.optimizer.kind = train::parse_optimizer(v); }},
      {"adam_beta1", [](RunConfig& c, const std::string& v) { c.train.optimizer.beta1 = to_double(v); }},
      {"adam_beta2", [](RunConfig& c, const std::string& v) { c.train.optimizer.beta2 = to_double(v); }},
      {"adam_epsilon", [](RunConfig& c, const std::string& v) { c.train.optimizer.epsilon = to_double(v); }},
      {"sampler",
       [](RunConfig& c, const std::string& v) {
         c.train.sampler = v == "auto" ? std::nullopt : std::optional(sampling::parse_sampler(v));
       }},
      {"workers", [](RunConfig& c, const std::string& v) { c.train.workers = to_unsigned(v); }},
      {"checkpoint_every", [](RunConfig& c, const std::string& v) { c.train.checkpoint_every = to_unsigned(v); }},
      {"hidden_widths",
       [](RunConfig& c, const std::string& v) {
         c.hidden_widths.clear();
         for (const auto& p : split(v, ',')) {
           const auto w = to_unsigned(p);
           if (w == 0) throw ContractViolation("hidden widths must be positive");
           c.hidden_widths.push_back(w);
         }
       }},
      {"activation",
       [](RunConfig& c, const std::string& v) {
         if (v == "tanh") c.activation = nn::Activation::kTanh;
         else if (v == "relu") c.activation = nn::Activation::kRelu;
         else throw ContractViolation("expected tanh or relu, got '" + v + "'");
       }},
      {"learnable_phi", [](RunConfig& c, const std::string& v) { c.learnable_phi = to_bool(v); }},
      {"model_seed", [](RunConfig& c, const std::string& v) { c.model_seed = to_unsigned(v); }},
      {"dataset",
       [](RunConfig& c, const std::string& v) {
         if (v == "circles") c.dataset = DatasetKind::kCircles;
         else if (v == "blobs") c.dataset = DatasetKind::kBlobs;
         else if (v == "csv") c.dataset = DatasetKind::kCsv;
         else throw ContractViolation("expected circles, blobs or csv, got '" + v + "'");
       }},
      {"dataset_path", [](RunConfig& c, const std::string& v) { c.dataset_path = v; }},
      {"dataset_count", [](RunConfig& c, const std::string& v) { c.dataset_count = to_unsigned(v); }},
      {"dataset_noise", [](RunConfig& c, const std::string& v) { c.dataset_noise = to_double(v); }},
      {"dataset_seed", [](RunConfig& c, const std::string& v) { c.dataset_seed = to_unsigned(v); }},
      {"circle_radii", [](RunConfig& c, const std::string& v) { c.circle_radii = to_pair(v); }},
      {"blob_centers",
       [](RunConfig& c, const std::string& v) {
         c.blob_centers.clear();
         for (const auto& center : split(v, ';')) c.blob_centers.push_back(to_doubles(center));
       }},
      {"output_dir", [](RunConfig& c, const std::string& v) { c.output_dir = v; }},
      {"eval_solver", [](RunConfig& c, const std::string& v) { c.eval_solver = ode::parse_solver(v); }},
      {"eval_steps", [](RunConfig& c, const std::string& v) { c.eval_steps = to_unsigned(v); }},
      {"attack_norm", [](RunConfig& c, const std::string& v) { c.attack_norm = eval::parse_norm(v); }},
      {"attack_epsilon", [](RunConfig& c, const std::string& v) { c.attack_epsilon = to_double(v); }},
      {"attack_steps", [](RunConfig& c, const std::string& v) { c.attack_steps = to_unsigned(v); }},
      {"attack_step_size",
       [](RunConfig& c, const std::string& v) {
         c.attack_step_size = v == "auto" ? std::nullopt : std::optional<double>(to_double(v));
       }},
      {"portrait_bounds", [](RunConfig& c, const std::string& v) { c.portrait_bounds = to_pair(v); }},
      {"portrait_resolution", [](RunConfig& c, const std::string& v) { c.portrait_resolution = to_unsigned(v); }},
  };
  return table;
}

void validate(const RunConfig& c) {
  c.train.validate();
  if (c.hidden_widths.empty()) throw ContractViolation("hidden_widths must list at least one width");
  if (c.dataset == DatasetKind::kCsv && c.dataset_path.empty()) {
    throw ContractViolation("dataset = csv needs dataset_path");
  }
  if (!(c.dataset_noise >= 0.0)) throw ContractViolation("dataset_noise must be nonnegative");
  if (!(c.circle_radii[0] < c.circle_radii[1])) throw ContractViolation("circle_radii: inner must be below outer");
  if (c.blob_centers.size() < 2) throw ContractViolation("blob_centers needs at least two centers");
  for (const auto& center : c.blob_centers) {
    if (center.size() != c.blob_centers.front().size() || center.empty()) {
      throw ContractViolation("blob_centers must all have the same positive dimension");
    }
  }
  if (c.eval_steps < 1) throw ContractViolation("eval_steps must be at least 1");
  if (!(c.attack_epsilon >= 0.0)) throw ContractViolation("attack_epsilon must be nonnegative");
  if (c.attack_step_size && !(*c.attack_step_size >= 0.0)) {
    throw ContractViolation("attack_step_size must be nonnegative");
  }
  if (!(c.portrait_bounds[0] < c.portrait_bounds[1])) throw ContractViolation("portrait_bounds: lo must be below hi");
  if (c.portrait_resolution < 2) throw ContractViolation("portrait_resolution must be at least 2");
}

}  // namespace

train::TrainConfig RunConfig::default_train() {
  train::TrainConfig t;
  t.seed = 7;
  return t;
}

RunConfig parse_config(std::istream& in) {
  RunConfig config;
  std::set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string body = trim(line);
    if (body.empty() || body.front() == '#') continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ParseError("config line " + std::to_string(line_no) + ": expected key = value", line_no);
    const std::string key = trim(body.substr(0, eq));
    const std::string value = trim(body.substr(eq + 1));
    const auto it = setters().find(key);
    if (it == setters().end()) {
      throw ParseError("config line " + std::to_string(line_no) + ": unknown key '" + key + "'", line_no);
    }
    if (!seen.insert(key).second) {
      throw ParseError("config line " + std::to_string(line_no) + ": repeated key '" + key + "'", line_no);
    }
    try {
      it->second(config, value);
    } catch (const ContractViolation& e) {
      throw ParseError("config line " + std::to_string(line_no) + ": " + key + ": " + e.what(), line_no);
    }
  }
  try {
    validate(config);
  } catch (const ContractViolation& e) {
    throw ParseError(std::string("config: ") + e.what(), 0);
  }
  return config;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config file '" + path.string() + "'", 0);
  return parse_config(in);
}

void write_config(std::ostream& out, const RunConfig& c) {
  const auto& t = c.train;
  out << "trainer = " << train::to_string(t.trainer) << '\n'
      << "kappa = " << fmt(t.kappa) << '\n'
      << "kappa_d = " << (t.kappa_d ? fmt(*t.kappa_d) : "auto") << '\n'
      << "samples = " << t.samples << '\n'
      << "steps = " << t.steps << '\n'
      << "solver = " << ode::to_string(t.solver) << '\n'
      << "learning_rate = " << fmt(t.learning_rate) << '\n'
      << "iterations = " << t.iterations << '\n'
      << "batch_size = " << t.batch_size << '\n'
      << "seed = " << t.seed << '\n'
      << "optimizer = " << train::to_string(t.optimizer.kind) << '\n'
      << "adam_beta1 = " << fmt(t.optimizer.beta1) << '\n'
      << "adam_beta2 = " << fmt(t.optimizer.beta2) << '\n'
      << "adam_epsilon = " << fmt(t.optimizer.epsilon) << '\n'
      << "sampler = " << (t.sampler ? sampling::to_string(*t.sampler) : "auto") << '\n'
      << "workers = " << t.workers << '\n'
      << "checkpoint_every = " << t.checkpoint_every << '\n'
      << "hidden_widths = "
      << join<std::size_t>(c.hidden_widths, [](const std::size_t& w) { return std::to_string(w); }, ",") << '\n'
      << "activation = " << (c.activation == nn::Activation::kTanh ? "tanh" : "relu") << '\n'
      << "learnable_phi = " << (c.learnable_phi ? "true" : "false") << '\n'
      << "model_seed = " << c.model_seed << '\n'
      << "dataset = " << dataset_name(c.dataset) << '\n'
      << "dataset_path = " << c.dataset_path << '\n'
      << "dataset_count = " << c.dataset_count << '\n'
      << "dataset_noise = " << fmt(c.dataset_noise) << '\n'
      << "dataset_seed = " << c.dataset_seed << '\n'
      << "circle_radii = " << fmt(c.circle_radii[0]) << ',' << fmt(c.circle_radii[1]) << '\n'
      << "blob_centers = "
      << join<std::vector<double>>(
             c.blob_centers,
             [](const std::vector<double>& v) { return join<double>(v, [](const double& d) { return fmt(d); }, ","); },
             ";")
      << '\n'
      << "output_dir = " << c.output_dir << '\n'
      << "eval_solver = " << ode::to_string(c.eval_solver) << '\n'
      << "eval_steps = " << c.eval_steps << '\n'
      << "attack_norm = " << eval::to_string(c.attack_norm) << '\n'
      << "attack_epsilon = " << fmt(c.attack_epsilon) << '\n'
      << "attack_steps = " << c.attack_steps << '\n'
      << "attack_step_size = " << (c.attack_step_size ? fmt(*c.attack_step_size) : "auto") << '\n'
      << "portrait_bounds = " << fmt(c.portrait_bounds[0]) << ',' << fmt(c.portrait_bounds[1]) << '\n'
      << "portrait_resolution = " << c.portrait_resolution << '\n';
}

data::LabeledDataset make_dataset(const RunConfig& c) {
  switch (c.dataset) {
    case DatasetKind::kCircles:
      return data::gen_circles(c.dataset_count, c.circle_radii[0], c.circle_radii[1], c.dataset_noise, c.dataset_seed);
    case DatasetKind::kBlobs: return data::gen_blobs(c.dataset_count, c.blob_centers, c.dataset_noise, c.dataset_seed);
    case DatasetKind::kCsv: return data::load_csv(c.dataset_path);
  }
  throw ContractViolation("make_dataset: unknown dataset kind");
}

ode::OdeSystem make_system(const RunConfig& c, std::size_t input_dim, std::size_t classes) {
  return ode::OdeSystem::make_default(input_dim, classes, c.hidden_widths, c.activation, c.model_seed,
                                      c.learnable_phi);
}

}  // namespace lyanet::cli
