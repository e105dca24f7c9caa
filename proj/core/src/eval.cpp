#include "lyanet/eval.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <numbers>
#include <ostream>

#include "lyanet/error.hpp"
#include "lyanet/nn.hpp"
#include "lyanet/parallel.hpp"
#include "lyanet/sampling.hpp"

namespace lyanet::eval {
namespace {

// Runs fn(i) for every example index on the shared chunk decomposition.
template <typename Fn>
void for_each_example(std::size_t count, std::size_t workers, Fn&& fn) {
  parallel_chunks(count, kReductionChunks, resolve_workers(workers), [&](std::size_t, std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) fn(i);
  });
}

std::size_t predict(const ode::OdeSystem& system, std::span<const double> x, ode::Solver solver, std::size_t steps) {
  return argmax(ode::infer(system, x, 1.0, solver, steps));
}

// Same grid split as ode::state_at.
std::size_t full_steps_before(double t_end, std::size_t steps) {
  const auto grid_time = [steps](std::size_t j) { return static_cast<double>(j) / static_cast<double>(steps); };
  std::size_t full = static_cast<std::size_t>(std::floor(t_end * static_cast<double>(steps)));
  if (full > steps) full = steps;
  while (full > 0 && grid_time(full) > t_end) --full;
  while (full < steps && grid_time(full + 1) <= t_end) ++full;
  return full;
}

}  // namespace

std::size_t argmax(std::span<const double> values) {
  if (values.empty()) throw ContractViolation("argmax: empty input");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

AccuracyReport accuracy(const ode::OdeSystem& system, const data::LabeledDataset& dataset, double t_end,
                        ode::Solver solver, std::size_t steps, std::size_t workers) {
  if (dataset.empty()) throw ContractViolation("accuracy: empty dataset");
  const std::size_t m = system.dims().classes;
  std::vector<std::size_t> predicted(dataset.size());
  for_each_example(dataset.size(), workers, [&](std::size_t i) {
    predicted[i] = argmax(ode::infer(system, dataset.inputs[i], t_end, solver, steps));
  });
  AccuracyReport report;
  report.confusion.assign(m, std::vector<std::size_t>(m, 0));
  std::size_t hits = 0;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (dataset.labels[i] >= m) throw ContractViolation("accuracy: label outside the model's classes");
    ++report.confusion[dataset.labels[i]][predicted[i]];
    if (predicted[i] == dataset.labels[i]) ++hits;
  }
  report.accuracy = static_cast<double>(hits) / static_cast<double>(dataset.size());
  return report;
}

std::vector<CurvePoint> convergence_curve(const ode::OdeSystem& system, const data::LabeledDataset& dataset,
                                          std::span<const double> times, ode::Solver solver, std::size_t steps,
                                          std::size_t workers) {
  if (dataset.empty()) throw ContractViolation("convergence_curve: empty dataset");
  if (steps < 1) throw ContractViolation("convergence_curve: steps must be at least 1");
  for (double t : times) {
    if (!(t > 0.0 && t <= 1.0)) throw ContractViolation("convergence_curve: times must lie in (0, 1]");
  }
  std::vector<std::size_t> order(times.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return times[a] < times[b]; });

  const double h = 1.0 / static_cast<double>(steps);
  const auto field = ode::as_field(system);
  // losses[i * T + q], hits likewise.
  std::vector<double> losses(dataset.size() * times.size());
  std::vector<char> hits(dataset.size() * times.size());
  for_each_example(dataset.size(), workers, [&](std::size_t i) {
    const auto& x = dataset.inputs[i];
    auto eta = system.initial_state(x);
    std::size_t at = 0;
    for (std::size_t q : order) {
      const double t_end = times[q];
      const std::size_t full = full_steps_before(t_end, steps);
      for (; at < full; ++at) eta = ode::step(field, eta, x, static_cast<double>(at) / static_cast<double>(steps), h, solver);
      const double t_full = static_cast<double>(full) / static_cast<double>(steps);
      const auto state = t_end > t_full ? ode::step(field, eta, x, t_full, t_end - t_full, solver) : eta;
      for (double v : state) {
        if (!std::isfinite(v)) throw DivergenceError("convergence_curve: state diverged", full);
      }
      const auto logits = system.logits(state);
      losses[i * times.size() + q] = potential::cross_entropy(logits, dataset.labels[i]);
      hits[i * times.size() + q] = argmax(logits) == dataset.labels[i];
    }
  });
  std::vector<CurvePoint> curve(times.size());
  for (std::size_t q = 0; q < times.size(); ++q) {
    double loss = 0.0;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
      loss += losses[i * times.size() + q];
      correct += hits[i * times.size() + q] ? 1 : 0;
    }
    const double n = static_cast<double>(dataset.size());
    curve[q] = {times[q], loss / n, static_cast<double>(correct) / n};
  }
  return curve;
}

std::vector<double> linspace(double first, double last, std::size_t count) {
  if (count < 1) throw ContractViolation("linspace: count must be positive");
  if (count == 1) return {last};
  std::vector<double> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    out[i] = first + (last - first) * static_cast<double>(i) / static_cast<double>(count - 1);
  }
  out.back() = last;
  return out;
}

void write_curve_csv(std::ostream& out, std::span<const CurvePoint> curve) {
  out << "t,mean_loss,accuracy\n";
  for (const auto& p : curve) {
    out << data::format_double(p.t) << ',' << data::format_double(p.mean_loss) << ','
        << data::format_double(p.accuracy) << '\n';
  }
}

DecayAuditEntry audit_trajectory(const potential::Potential& potential, const ode::VectorField& field,
                                 std::span<const double> eta0, std::span<const double> x, double rate,
                                 ode::Solver solver, std::size_t steps) {
  const auto traj = ode::solve(field, eta0, x, solver, steps);
  DecayAuditEntry entry;
  entry.initial_value = potential.value(traj.states.front());
  entry.final_value = potential.value(traj.states.back());
  entry.violation = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < traj.size(); ++j) {
    const double gap = potential.value(traj.states[j]) - entry.initial_value * std::exp(-rate * traj.times[j]);
    if (gap > entry.violation) {
      entry.violation = gap;
      entry.worst_time = traj.times[j];
    }
  }
  return entry;
}

DecayAuditEntry stability_audit(const ode::OdeSystem& system, std::span<const double> x, std::size_t label,
                                double kappa, ode::Solver solver, std::size_t steps) {
  const potential::CrossEntropyPotential pot(system.psi(), label);
  return audit_trajectory(pot, ode::as_field(system), system.initial_state(x), x, kappa, solver, steps);
}

DecayAudit stability_audit(const ode::OdeSystem& system, const data::LabeledDataset& dataset, double kappa,
                           ode::Solver solver, std::size_t steps, std::size_t workers) {
  DecayAudit audit;
  audit.steps = steps;
  audit.solver = solver;
  audit.rate = kappa;
  audit.entries.resize(dataset.size());
  for_each_example(dataset.size(), workers, [&](std::size_t i) {
    audit.entries[i] = stability_audit(system, dataset.inputs[i], dataset.labels[i], kappa, solver, steps);
  });
  return audit;
}

void write_audit_csv(std::ostream& out, const DecayAudit& audit, const data::LabeledDataset& dataset) {
  if (audit.entries.size() != dataset.size()) throw ContractViolation("write_audit_csv: audit/dataset size mismatch");
  out << "index,label,initial_value,final_value,violation,worst_time,passes\n";
  for (std::size_t i = 0; i < audit.entries.size(); ++i) {
    const auto& e = audit.entries[i];
    out << i << ',' << dataset.labels[i] << ',' << data::format_double(e.initial_value) << ','
        << data::format_double(e.final_value) << ',' << data::format_double(e.violation) << ','
        << data::format_double(e.worst_time) << ',' << (e.passes() ? 1 : 0) << '\n';
  }
}

DeltaStability delta_stability_check(const ode::OdeSystem& system, std::span<const double> x, std::size_t label,
                                     double kappa, ode::Solver solver, std::size_t steps, double tolerance) {
  DeltaStability out;
  out.audit = stability_audit(system, x, label, kappa, solver, steps);
  out.correct = predict(system, x, solver, steps) == label;
  out.delta = out.audit.final_value;
  const double slack = tolerance * out.audit.initial_value;
  out.exp_stable = out.audit.violation <= slack &&
                   out.audit.final_value <= std::exp(-kappa) * out.audit.initial_value + slack;
  return out;
}

const char* to_string(Norm norm) { return norm == Norm::kLinf ? "linf" : "l2"; }

Norm parse_norm(const std::string& name) {
  if (name == "linf") return Norm::kLinf;
  if (name == "l2") return Norm::kL2;
  throw ContractViolation("unknown norm '" + name + "' (expected linf or l2)");
}

double norm(std::span<const double> v, Norm which) {
  double acc = 0.0;
  for (double e : v) acc = which == Norm::kLinf ? std::max(acc, std::abs(e)) : acc + e * e;
  return which == Norm::kLinf ? acc : std::sqrt(acc);
}

std::vector<double> pgd_attack(const LossGradient& gradient, std::span<const double> x0, const PgdConfig& config) {
  if (!(config.epsilon >= 0.0)) throw ContractViolation("pgd_attack: epsilon must be nonnegative");
  std::vector<double> x(x0.begin(), x0.end());
  if (config.epsilon == 0.0) return x;
  std::vector<double> delta(x.size());
  for (std::size_t s = 0; s < config.steps; ++s) {
    const auto g = gradient(x);
    if (g.size() != x.size()) throw ContractViolation("pgd_attack: gradient length mismatch");
    const double g_norm = norm(g, Norm::kL2);
    if (g_norm == 0.0) continue;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double dir = config.norm == Norm::kLinf ? (g[i] > 0.0 ? 1.0 : (g[i] < 0.0 ? -1.0 : 0.0)) : g[i] / g_norm;
      delta[i] = x[i] + config.step_size * dir - x0[i];
    }
    if (config.norm == Norm::kLinf) {
      for (double& d : delta) d = std::clamp(d, -config.epsilon, config.epsilon);
    } else {
      const double d_norm = norm(delta, Norm::kL2);
      if (d_norm > config.epsilon) {
        for (double& d : delta) d *= config.epsilon / d_norm;
      }
    }
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = x0[i] + delta[i];
  }
  return x;
}

std::vector<double> input_gradient(const ode::OdeSystem& system, std::span<const double> x, std::size_t label,
                                   ode::Solver solver, std::size_t steps) {
  diff::Graph graph;
  const auto x_node = graph.input(0, x);
  const auto dynamics = nn::MlpBinding::frozen(graph, system.dynamics());
  diff::NodeId eta0;
  if (system.phi()) {
    eta0 = nn::MlpBinding::frozen(graph, *system.phi()).forward(graph, x_node);
  } else {
    eta0 = graph.constant(std::vector<double>(system.dims().state, 0.0));
  }
  const auto states = ode::rollout(graph, dynamics, eta0, x_node, solver, steps);
  const auto loss = potential::cross_entropy(graph, system.psi().apply(graph, states.back()), label);
  return graph.backward(loss, {0}).at(0);
}

std::vector<double> pgd_attack(const ode::OdeSystem& system, std::span<const double> x0, std::size_t label,
                               const PgdConfig& config, ode::Solver solver, std::size_t steps) {
  return pgd_attack(
      [&](std::span<const double> x) { return input_gradient(system, x, label, solver, steps); }, x0, config);
}

AttackSummary attack_dataset(const ode::OdeSystem& system, const data::LabeledDataset& dataset,
                             const PgdConfig& config, ode::Solver solver, std::size_t steps, std::size_t workers) {
  if (dataset.empty()) throw ContractViolation("attack_dataset: empty dataset");
  AttackSummary summary;
  summary.records.resize(dataset.size());
  for_each_example(dataset.size(), workers, [&](std::size_t i) {
    const auto& x0 = dataset.inputs[i];
    const std::size_t y = dataset.labels[i];
    const auto adv = pgd_attack(system, x0, y, config, solver, steps);
    std::vector<double> diff(x0.size());
    for (std::size_t j = 0; j < diff.size(); ++j) diff[j] = adv[j] - x0[j];
    auto& r = summary.records[i];
    r.clean_correct = predict(system, x0, solver, steps) == y;
    r.adversarial_correct = predict(system, adv, solver, steps) == y;
    r.perturbation_norm = norm(diff, config.norm);
  });
  std::size_t clean_wrong = 0;
  std::size_t adv_wrong = 0;
  for (const auto& r : summary.records) {
    clean_wrong += r.clean_correct ? 0 : 1;
    adv_wrong += r.adversarial_correct ? 0 : 1;
  }
  const double n = static_cast<double>(dataset.size());
  summary.clean_error = static_cast<double>(clean_wrong) / n;
  summary.adversarial_error = static_cast<double>(adv_wrong) / n;
  return summary;
}

void write_attack_csv(std::ostream& out, const AttackSummary& summary, const data::LabeledDataset& dataset) {
  if (summary.records.size() != dataset.size()) throw ContractViolation("write_attack_csv: size mismatch");
  out << "index,label,clean_correct,adversarial_correct,perturbation_norm\n";
  for (std::size_t i = 0; i < summary.records.size(); ++i) {
    const auto& r = summary.records[i];
    out << i << ',' << dataset.labels[i] << ',' << (r.clean_correct ? 1 : 0) << ','
        << (r.adversarial_correct ? 1 : 0) << ',' << data::format_double(r.perturbation_norm) << '\n';
  }
}

Certificate robustness_certificate(double delta, double lipschitz, double kappa) {
  if (!(delta >= 0.0)) throw ContractViolation("robustness_certificate: delta must be nonnegative");
  if (!(lipschitz > 0.0)) throw ContractViolation("robustness_certificate: Lipschitz bound must be positive");
  if (!(kappa > 0.0)) throw ContractViolation("robustness_certificate: kappa must be positive");
  Certificate c;
  c.delta = delta;
  c.lipschitz = lipschitz;
  c.kappa = kappa;
  c.radius = std::max(0.0, (std::numbers::ln2 - delta) * kappa / (lipschitz * -std::expm1(-kappa)));
  return c;
}

LipschitzComposition certificate_lipschitz(const ode::OdeSystem& system, double state_half_width,
                                           double input_half_width, std::size_t pairs, std::uint64_t seed) {
  if (!(state_half_width > 0.0) || !(input_half_width > 0.0)) {
    throw ContractViolation("certificate_lipschitz: half-widths must be positive");
  }
  const auto& dims = system.dims();
  LipschitzComposition out;
  out.potential = std::numbers::sqrt2 * system.psi().operator_norm();
  const auto bound = nn::lipschitz_upper_bound(system.dynamics(), dims.state, dims.input);
  out.field_input = bound.bound;
  out.converged = bound.converged;
  const double root_n = std::sqrt(static_cast<double>(dims.input));
  out.total = out.potential * out.field_input * root_n;

  Rng rng(seed);
  double sampled = 0.0;
  std::vector<double> eta(dims.state), a(dims.input), b(dims.input);
  for (std::size_t p = 0; p < pairs; ++p) {
    for (double& v : eta) v = rng.uniform(-state_half_width, state_half_width);
    const double t = rng.uniform();
    for (double& v : a) v = rng.uniform(-input_half_width, input_half_width);
    for (double& v : b) v = rng.uniform(-input_half_width, input_half_width);
    const auto fa = system.field(eta, a, t);
    const auto fb = system.field(eta, b, t);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < fa.size(); ++i) num += (fa[i] - fb[i]) * (fa[i] - fb[i]);
    for (std::size_t i = 0; i < a.size(); ++i) den += (a[i] - b[i]) * (a[i] - b[i]);
    if (den > 0.0) sampled = std::max(sampled, std::sqrt(num / den));
  }
  out.sampled_total = out.potential * sampled * root_n;
  return out;
}

Certificate certify_dataset(const ode::OdeSystem& system, const data::LabeledDataset& dataset, double kappa,
                            ode::Solver solver, std::size_t steps, std::uint64_t seed, std::size_t workers) {
  if (dataset.empty()) throw ContractViolation("certify_dataset: empty dataset");
  std::vector<DeltaStability> checks(dataset.size());
  for_each_example(dataset.size(), workers, [&](std::size_t i) {
    checks[i] = delta_stability_check(system, dataset.inputs[i], dataset.labels[i], kappa, solver, steps);
  });
  double delta = 0.0;
  std::size_t certified = 0;
  double input_half_width = 0.0;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    input_half_width = std::max(input_half_width, norm(dataset.inputs[i], Norm::kLinf));
    if (checks[i].correct && checks[i].exp_stable) {
      delta = std::max(delta, checks[i].delta);
      ++certified;
    }
  }
  const double state_half_width = sampling::hypercube_halfwidth(system.psi(), kappa, system.dims().classes);
  const auto lip = certificate_lipschitz(system, state_half_width, std::max(input_half_width, 1.0), kLipschitzPairs, seed);
  Certificate c = robustness_certificate(certified > 0 ? delta : std::numbers::ln2, lip.total, kappa);
  c.lipschitz_sampled = lip.sampled_total;
  c.lipschitz_converged = lip.converged;
  c.examples = dataset.size();
  c.certified_examples = certified;
  return c;
}

void write_certificate(std::ostream& out, const Certificate& c) {
  out << "norm=" << to_string(c.norm) << '\n'
      << "delta=" << data::format_double(c.delta) << '\n'
      << "lipschitz=" << data::format_double(c.lipschitz) << '\n'
      << "lipschitz_sampled=" << data::format_double(c.lipschitz_sampled) << '\n'
      << "lipschitz_converged=" << (c.lipschitz_converged ? 1 : 0) << '\n'
      << "kappa=" << data::format_double(c.kappa) << '\n'
      << "radius=" << data::format_double(c.radius) << '\n'
      << "examples=" << c.examples << '\n'
      << "certified_examples=" << c.certified_examples << '\n';
}

Certificate read_certificate(std::istream& in) {
  std::map<std::string, std::string> fields;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("certificate: expected key=value", line_no);
    fields[line.substr(0, eq)] = line.substr(eq + 1);
  }
  auto get = [&](const char* key) -> const std::string& {
    const auto it = fields.find(key);
    if (it == fields.end()) throw ParseError(std::string("certificate: missing key '") + key + "'", 0);
    return it->second;
  };
  auto number = [&](const char* key) {
    try {
      std::size_t used = 0;
      const double v = std::stod(get(key), &used);
      if (used != get(key).size()) throw std::invalid_argument(key);
      return v;
    } catch (const std::logic_error&) {
      throw ParseError(std::string("certificate: bad number for '") + key + "'", 0);
    }
  };
  Certificate c;
  try {
    c.norm = parse_norm(get("norm"));
  } catch (const ContractViolation& e) {
    throw ParseError(std::string("certificate: ") + e.what(), 0);
  }
  c.delta = number("delta");
  c.lipschitz = number("lipschitz");
  c.lipschitz_sampled = number("lipschitz_sampled");
  c.lipschitz_converged = get("lipschitz_converged") == "1";
  c.kappa = number("kappa");
  c.radius = number("radius");
  if (fields.count("examples")) c.examples = static_cast<std::size_t>(number("examples"));
  if (fields.count("certified_examples")) c.certified_examples = static_cast<std::size_t>(number("certified_examples"));
  return c;
}

std::size_t count_flips(const ode::OdeSystem& system, std::span<const double> x, std::size_t label, double radius,
                        std::size_t draws, Rng& rng, ode::Solver solver, std::size_t steps) {
  std::size_t flips = 0;
  std::vector<double> xp(x.size());
  for (std::size_t d = 0; d < draws; ++d) {
    for (std::size_t i = 0; i < x.size(); ++i) xp[i] = x[i] + rng.uniform(-radius, radius);
    if (predict(system, xp, solver, steps) != label) ++flips;
  }
  return flips;
}

}  // namespace lyanet::eval
