#include "lyanet/cli/commands.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "lyanet/cli/config.hpp"
#include "lyanet/data.hpp"
#include "lyanet/error.hpp"
#include "lyanet/eval.hpp"
#include "lyanet/potential.hpp"
#include "lyanet/train.hpp"

namespace lyanet::cli {
namespace fs = std::filesystem;
namespace {

// Raised for bad usage that is not a parse error of a file.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UsageError("cannot write " + path.string());
  return out;
}

fs::path prepare_dir(const std::string& dir) {
  const fs::path path(dir.empty() ? "." : dir);
  std::error_code ec;
  fs::create_directories(path, ec);
  if (ec) throw UsageError("cannot create output directory " + path.string() + ": " + ec.message());
  return path;
}

void check_compatible(const ode::OdeSystem& system, const data::LabeledDataset& dataset) {
  if (dataset.input_dim != system.dims().input) {
    throw UsageError("dataset has " + std::to_string(dataset.input_dim) + " input columns but the checkpoint expects " +
                     std::to_string(system.dims().input));
  }
  for (std::size_t y : dataset.labels) {
    if (y >= system.dims().classes) {
      throw UsageError("dataset label " + std::to_string(y) + " is outside the checkpoint's " +
                       std::to_string(system.dims().classes) + " classes");
    }
  }
}

std::vector<double> parse_numbers(const std::string& text, char sep) {
  std::vector<double> out;
  std::stringstream in(text);
  std::string part;
  while (std::getline(in, part, sep)) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(part, &used));
      if (used != part.size()) throw std::invalid_argument(part);
    } catch (const std::logic_error&) {
      throw UsageError("expected a number, got '" + part + "'");
    }
  }
  return out;
}

struct Loaded {
  nn::Checkpoint checkpoint;
  ode::OdeSystem system;
};

Loaded load_model(const std::string& path) {
  auto checkpoint = nn::load_checkpoint(path);
  auto system = system_from(checkpoint);
  return {std::move(checkpoint), std::move(system)};
}

data::LabeledDataset load_dataset(const std::string& path, const ode::OdeSystem& system) {
  auto dataset = data::load_csv(path, system.dims().classes);
  check_compatible(system, dataset);
  return dataset;
}

int cmd_train(const std::string& config_path, std::optional<std::size_t> workers, const std::string& save_dataset) {
  auto config = load_config(config_path);
  if (workers) config.train.workers = *workers;
  const auto dataset = make_dataset(config);
  dataset.validate();
  const auto out_dir = prepare_dir(config.output_dir);
  {
    auto echo = open_output(out_dir / "config.txt");
    write_config(echo, config);
  }
  if (!save_dataset.empty()) data::save_csv(dataset, save_dataset);

  auto system = make_system(config, dataset.input_dim, dataset.classes);
  const std::string trainer = train::to_string(config.train.trainer);
  const auto ckpt_path = out_dir / "checkpoint.bin";
  auto hook = [&](std::size_t, const ode::OdeSystem& sys) {
    nn::save_checkpoint(ckpt_path, make_checkpoint(sys, config.train.kappa, config.train.seed, trainer));
  };
  const auto report = train::train(config.train, dataset, std::move(system), hook);
  {
    auto csv = open_output(out_dir / "train.csv");
    train::write_train_csv(csv, report);
  }
  std::cout << "trained " << trainer << " for " << report.losses.size() << " iterations; final loss "
            << data::format_double(report.losses.back()) << "\nwrote " << ckpt_path.string() << '\n';
  return kExitOk;
}

struct EvalOptions {
  std::string checkpoint;
  std::string dataset;
  std::string out;
  std::string solver = "rk4";
  std::size_t steps = 32;
  std::string curve;
  bool audit = false;
  bool certify = false;
  std::optional<std::size_t> workers;
};

int cmd_eval(const EvalOptions& o) {
  const auto [checkpoint, system] = load_model(o.checkpoint);
  const auto dataset = load_dataset(o.dataset, system);
  const auto solver = ode::parse_solver(o.solver);
  if (o.steps < 1) throw UsageError("--steps must be at least 1");
  const std::size_t workers = o.workers.value_or(0);
  const auto out_dir = prepare_dir(o.out.empty() ? fs::path(o.checkpoint).parent_path().string() : o.out);

  const auto acc = eval::accuracy(system, dataset, 1.0, solver, o.steps, workers);
  std::cout << "accuracy=" << data::format_double(acc.accuracy) << '\n';
  if (!o.curve.empty()) {
    const auto times = parse_curve_spec(o.curve);
    const auto curve = eval::convergence_curve(system, dataset, times, solver, o.steps, workers);
    auto csv = open_output(out_dir / "curve.csv");
    eval::write_curve_csv(csv, curve);
  }
  if (o.audit) {
    const auto audit = eval::stability_audit(system, dataset, checkpoint.kappa, ode::Solver::kRk4, eval::kAuditSteps,
                                             workers);
    auto csv = open_output(out_dir / "audit.csv");
    eval::write_audit_csv(csv, audit, dataset);
    std::size_t passing = 0;
    for (const auto& e : audit.entries) passing += e.passes() ? 1 : 0;
    std::cout << "audit_pass=" << passing << '/' << audit.entries.size() << '\n';
  }
  if (o.certify) {
    const auto cert = eval::certify_dataset(system, dataset, checkpoint.kappa, ode::Solver::kRk4, eval::kAuditSteps,
                                            checkpoint.seed, workers);
    auto txt = open_output(out_dir / "certificate.txt");
    eval::write_certificate(txt, cert);
    std::cout << "certified_radius=" << data::format_double(cert.radius) << '\n';
  }
  return kExitOk;
}

struct AttackOptions {
  std::string checkpoint;
  std::string dataset;
  std::string out;
  std::string norm = "linf";
  double epsilon = 0.1;
  std::size_t steps = 10;
  std::optional<double> step_size;
  std::string solver = "rk4";
  std::size_t solve_steps = 32;
  std::optional<std::size_t> workers;
};

int cmd_attack(const AttackOptions& o) {
  const auto [checkpoint, system] = load_model(o.checkpoint);
  const auto dataset = load_dataset(o.dataset, system);
  if (!(o.epsilon >= 0.0)) throw UsageError("--epsilon must be nonnegative");
  eval::PgdConfig pgd;
  pgd.norm = eval::parse_norm(o.norm);
  pgd.epsilon = o.epsilon;
  pgd.steps = o.steps;
  pgd.step_size = o.step_size.value_or(o.epsilon / 4.0);
  const auto out_dir = prepare_dir(o.out.empty() ? fs::path(o.checkpoint).parent_path().string() : o.out);
  const auto summary =
      eval::attack_dataset(system, dataset, pgd, ode::parse_solver(o.solver), o.solve_steps, o.workers.value_or(0));
  auto csv = open_output(out_dir / "attack.csv");
  eval::write_attack_csv(csv, summary, dataset);
  std::cout << "clean_error=" << data::format_double(summary.clean_error) << '\n'
            << "adversarial_error=" << data::format_double(summary.adversarial_error) << '\n';
  return kExitOk;
}

struct PortraitOptions {
  std::string checkpoint;
  std::string out;
  std::string bounds = "-2.5:2.5";
  std::size_t resolution = 20;
  std::size_t label = 0;
  std::string input;
  double time = 0.5;
  bool quiver = false;
  std::string solver = "rk4";
  std::size_t steps = 32;
};

int cmd_portrait(const PortraitOptions& o, bool quiver_requested) {
  const auto [checkpoint, system] = load_model(o.checkpoint);
  const auto& dims = system.dims();
  const auto solver = ode::parse_solver(o.solver);
  const auto b = parse_numbers(o.bounds, ':');
  if (b.size() != 2 || !(b[0] < b[1])) throw UsageError("--bounds must be lo:hi with lo < hi");
  if (o.resolution < 2) throw UsageError("--resolution must be at least 2");
  if (o.label >= dims.classes) throw UsageError("--label is outside the model's classes");
  if (!(o.time >= 0.0 && o.time <= 1.0)) throw UsageError("--time must lie in [0, 1]");
  const bool want_field = dims.state == 2;
  if (quiver_requested && !want_field) {
    throw UsageError("vector-field export needs a 2-dimensional state (this model has " + std::to_string(dims.state) +
                     "); drop --quiver for boundary-only output");
  }
  if (dims.input != 2) throw UsageError("portrait needs a 2-dimensional input space");
  std::vector<double> x(dims.input, 0.0);
  if (!o.input.empty()) {
    x = parse_numbers(o.input, ',');
    if (x.size() != dims.input) throw UsageError("--input must have " + std::to_string(dims.input) + " entries");
  }
  const auto out_dir = prepare_dir(o.out.empty() ? fs::path(o.checkpoint).parent_path().string() : o.out);
  const std::array<data::AxisBounds, 2> axes{data::AxisBounds{b[0], b[1]}, data::AxisBounds{b[0], b[1]}};
  const auto lattice = data::grid(axes, o.resolution);

  if (want_field) {
    const potential::CrossEntropyPotential pot(system.psi(), o.label);
    auto csv = open_output(out_dir / "portrait_field.csv");
    csv << "eta_0,eta_1,f_0,f_1,potential\n";
    for (const auto& p : lattice) {
      const auto f = system.field(p, x, o.time);
      csv << data::format_double(p[0]) << ',' << data::format_double(p[1]) << ',' << data::format_double(f[0]) << ','
          << data::format_double(f[1]) << ',' << data::format_double(pot.value(p)) << '\n';
    }
  } else {
    std::cout << "state dimension " << dims.state << " != 2: skipping portrait_field.csv\n";
  }
  {
    auto csv = open_output(out_dir / "portrait_softmax.csv");
    csv << data::csv_header(2);
    for (std::size_t c = 0; c < dims.classes; ++c) csv << ",p_" << c;
    csv << '\n';
    for (const auto& p : lattice) {
      const auto prob = ode::infer(system, p, 1.0, solver, o.steps);
      csv << data::format_double(p[0]) << ',' << data::format_double(p[1]) << ',' << eval::argmax(prob);
      for (double v : prob) csv << ',' << data::format_double(v);
      csv << '\n';
    }
  }
  {
    auto csv = open_output(out_dir / "portrait_trajectories.csv");
    csv << "start,x_0,x_1,t";
    for (std::size_t i = 0; i < dims.state; ++i) csv << ",eta_" << i;
    csv << '\n';
    const auto starts = data::grid(axes, 10);
    for (std::size_t s = 0; s < starts.size(); ++s) {
      const auto traj = ode::solve(system, starts[s], solver, o.steps);
      for (std::size_t j = 0; j < traj.size(); ++j) {
        csv << s << ',' << data::format_double(starts[s][0]) << ',' << data::format_double(starts[s][1]) << ','
            << data::format_double(traj.times[j]);
        for (double v : traj.states[j]) csv << ',' << data::format_double(v);
        csv << '\n';
      }
    }
  }
  std::cout << "wrote portrait files to " << out_dir.string() << '\n';
  return kExitOk;
}

}  // namespace

nn::Checkpoint make_checkpoint(const ode::OdeSystem& system, double kappa, std::uint64_t seed,
                               const std::string& trainer) {
  const auto& d = system.dims();
  return nn::Checkpoint{d.input, d.state, d.classes, kappa, seed, trainer, system.dynamics(), system.phi(),
                        system.psi()};
}

ode::OdeSystem system_from(const nn::Checkpoint& c) {
  try {
    return ode::OdeSystem(ode::Dims{c.input_dim, c.state_dim, c.classes}, c.dynamics, c.psi, c.phi);
  } catch (const ContractViolation& e) {
    throw ParseError(std::string("checkpoint: inconsistent system: ") + e.what(), 0);
  }
}

std::vector<double> parse_curve_spec(const std::string& spec) {
  const auto parts = parse_numbers(spec, ':');
  if (parts.size() != 3) throw UsageError("--curve expects first:last:count");
  const double count = parts[2];
  if (!(count >= 1.0) || count != std::floor(count)) throw UsageError("--curve count must be a positive integer");
  if (!(parts[0] > 0.0 && parts[1] <= 1.0 && parts[0] <= parts[1])) {
    throw UsageError("--curve times must satisfy 0 < first <= last <= 1");
  }
  return eval::linspace(parts[0], parts[1], static_cast<std::size_t>(count));
}

int run(int argc, char** argv) {
  CLI::App app{"Neural ODE classifiers with Lyapunov-loss training"};
  app.require_subcommand(1);

  std::optional<std::size_t> workers;
  std::string config_path;
  std::string save_dataset;
  auto* train_cmd = app.add_subcommand("train", "Train a model from a config file");
  train_cmd->add_option("config", config_path, "Config file (key = value lines)")->required();
  train_cmd->add_option("--workers", workers, "Worker threads (default: all cores)");
  train_cmd->add_option("--save-dataset", save_dataset, "Also write the training set as CSV");

  EvalOptions eval_opts;
  auto* eval_cmd = app.add_subcommand("eval", "Accuracy, early-termination curve, decay audit, certificate");
  eval_cmd->add_option("checkpoint", eval_opts.checkpoint, "Checkpoint written by train")->required();
  eval_cmd->add_option("dataset", eval_opts.dataset, "Dataset CSV")->required();
  eval_cmd->add_option("--out", eval_opts.out, "Output directory (default: the checkpoint's)");
  auto* eval_solver = eval_cmd->add_option("--solver", eval_opts.solver, "euler or rk4");
  auto* eval_steps = eval_cmd->add_option("--steps", eval_opts.steps, "Solver steps");
  eval_cmd->add_option("--curve", eval_opts.curve, "Early-termination curve first:last:count");
  eval_cmd->add_flag("--audit", eval_opts.audit, "Exponential-decay audit");
  eval_cmd->add_flag("--certify", eval_opts.certify, "Robustness certificate");
  eval_cmd->add_option("--workers", eval_opts.workers, "Worker threads (default: all cores)");
  std::string eval_config;
  eval_cmd->add_option("--config", eval_config, "Take eval_solver and eval_steps from a config file");

  AttackOptions attack_opts;
  auto* attack_cmd = app.add_subcommand("attack", "PGD attack on every example");
  attack_cmd->add_option("checkpoint", attack_opts.checkpoint, "Checkpoint written by train")->required();
  attack_cmd->add_option("dataset", attack_opts.dataset, "Dataset CSV")->required();
  attack_cmd->add_option("--out", attack_opts.out, "Output directory (default: the checkpoint's)");
  auto* attack_norm = attack_cmd->add_option("--norm", attack_opts.norm, "linf or l2");
  auto* attack_epsilon = attack_cmd->add_option("--epsilon", attack_opts.epsilon, "Perturbation budget");
  auto* attack_steps = attack_cmd->add_option("--steps", attack_opts.steps, "PGD iterations");
  auto* attack_step = attack_cmd->add_option("--step-size", attack_opts.step_size, "Default epsilon/4");
  auto* attack_solver = attack_cmd->add_option("--solver", attack_opts.solver, "euler or rk4");
  auto* attack_solve_steps = attack_cmd->add_option("--solve-steps", attack_opts.solve_steps, "Solver steps");
  attack_cmd->add_option("--workers", attack_opts.workers, "Worker threads (default: all cores)");
  std::string attack_config;
  attack_cmd->add_option("--config", attack_config, "Take attack_* and eval_* defaults from a config file");

  PortraitOptions portrait_opts;
  auto* portrait_cmd = app.add_subcommand("portrait", "Vector field, softmax grid and trajectories as CSV");
  portrait_cmd->add_option("checkpoint", portrait_opts.checkpoint, "Checkpoint written by train")->required();
  portrait_cmd->add_option("--out", portrait_opts.out, "Output directory (default: the checkpoint's)");
  auto* portrait_bounds = portrait_cmd->add_option("--bounds", portrait_opts.bounds, "lo:hi for both axes");
  auto* portrait_resolution = portrait_cmd->add_option("--resolution", portrait_opts.resolution, "Grid points per axis");
  portrait_cmd->add_option("--label", portrait_opts.label, "Class whose potential colors the field");
  portrait_cmd->add_option("--input", portrait_opts.input, "Input x conditioning the field, comma separated");
  portrait_cmd->add_option("--time", portrait_opts.time, "Time at which the field is sampled");
  auto* quiver = portrait_cmd->add_flag("--quiver", portrait_opts.quiver, "Require the vector-field export");
  auto* portrait_solver = portrait_cmd->add_option("--solver", portrait_opts.solver, "euler or rk4");
  auto* portrait_steps = portrait_cmd->add_option("--steps", portrait_opts.steps, "Solver steps");
  std::string portrait_config;
  portrait_cmd->add_option("--config", portrait_config, "Take portrait_* and eval_* defaults from a config file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  // Config values fill in only the flags left unset on the command line.
  auto unset = [](const CLI::Option* opt) { return opt->count() == 0; };
  try {
    if (*eval_cmd && !eval_config.empty()) {
      const auto c = load_config(eval_config);
      if (unset(eval_solver)) eval_opts.solver = ode::to_string(c.eval_solver);
      if (unset(eval_steps)) eval_opts.steps = c.eval_steps;
    }
    if (*attack_cmd && !attack_config.empty()) {
      const auto c = load_config(attack_config);
      if (unset(attack_norm)) attack_opts.norm = eval::to_string(c.attack_norm);
      if (unset(attack_epsilon)) attack_opts.epsilon = c.attack_epsilon;
      if (unset(attack_steps)) attack_opts.steps = c.attack_steps;
      if (unset(attack_step) && c.attack_step_size) attack_opts.step_size = c.attack_step_size;
      if (unset(attack_solver)) attack_opts.solver = ode::to_string(c.eval_solver);
      if (unset(attack_solve_steps)) attack_opts.solve_steps = c.eval_steps;
    }
    if (*portrait_cmd && !portrait_config.empty()) {
      const auto c = load_config(portrait_config);
      if (unset(portrait_bounds))
        portrait_opts.bounds = data::format_double(c.portrait_bounds[0]) + ":" + data::format_double(c.portrait_bounds[1]);
      if (unset(portrait_resolution)) portrait_opts.resolution = c.portrait_resolution;
      if (unset(portrait_solver)) portrait_opts.solver = ode::to_string(c.eval_solver);
      if (unset(portrait_steps)) portrait_opts.steps = c.eval_steps;
    }
    if (*train_cmd) return cmd_train(config_path, workers, save_dataset);
    if (*eval_cmd) return cmd_eval(eval_opts);
    if (*attack_cmd) return cmd_attack(attack_opts);
    if (*portrait_cmd) return cmd_portrait(portrait_opts, quiver->count() > 0);
  } catch (const TrainingAborted& e) {
    std::cerr << "error: " << e.what() << " (iteration " << e.iteration() << ")\n";
    return kExitAborted;
  } catch (const DivergenceError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitAborted;
  } catch (const NumericFault& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitAborted;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}

int run(const std::vector<std::string>& args) {
  std::vector<std::string> storage{"lyanet"};
  storage.insert(storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& s : storage) argv.push_back(s.data());
  return run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace lyanet::cli
