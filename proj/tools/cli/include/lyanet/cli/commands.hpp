#pragma once

// Subcommands of the `lyanet` tool. Exit codes: 0 success, 2 bad usage,
// config, checkpoint or dataset, 3 training aborted or a diverging solve.
//
// Output directory layout:
//   checkpoint.bin   trained system
//   train.csv        iteration,loss,wall_ms
//   config.txt       resolved config echo
//   curve.csv        t,mean_loss,accuracy
//   audit.csv        per-example decay audit
//   certificate.txt  key=value robustness certificate
//   attack.csv       per-example PGD outcome
//   portrait_field.csv, portrait_softmax.csv, portrait_trajectories.csv

#include <cstdint>
#include <string>
#include <vector>

#include "lyanet/checkpoint.hpp"
#include "lyanet/ode.hpp"

namespace lyanet::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitAborted = 3;

/// Checkpoint <-> system conversion used by every subcommand.
nn::Checkpoint make_checkpoint(const ode::OdeSystem& system, double kappa, std::uint64_t seed,
                               const std::string& trainer);
ode::OdeSystem system_from(const nn::Checkpoint& checkpoint);

/// Parses a curve spec `first:last:count` into `count` evenly spaced times.
std::vector<double> parse_curve_spec(const std::string& spec);

int run(int argc, char** argv);
/// Same as run() with argv[0] = "lyanet".
int run(const std::vector<std::string>& args);

}  // namespace lyanet::cli
