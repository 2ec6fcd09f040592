#pragma once

// Experiment drivers behind the `run`, `prop1` and `stats` subcommands.
// Each returns a process exit status and reports problems on `log`.
//
// Exit statuses: 0 success, 2 invalid configuration or input, 3 numeric failure
// during training (a checkpoint is written first), 1 I/O failure.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "ohtes/config.hpp"
#include "ohtes/harness.hpp"

namespace ohtes::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitIo = 1;
inline constexpr int kExitInvalid = 2;
inline constexpr int kExitNumeric = 3;

/// Trains per `config`, writing into config.out_dir:
///   run_config.txt  every resolved setting
///   progress.csv    step,eval_return,fitness_mean,<tuner summary>, one row per
///                   multiple of run.eval_every up to run.steps
///   checkpoint/     actor.bin, critic1.bin, critic2.bin and state.txt
int run(const RunConfig& config, std::ostream& log);

struct Prop1Config {
  std::vector<double> sigmas{0.1, 0.01, 0.001};
  std::vector<std::int64_t> ns{1000000};
  int repetitions = 1;
  std::uint64_t seed = 0;
  double a = 2.0, b = 0.0, psi = 0.0, g = 1.0, mu = 1.0;
  std::string out_path = "prop1.csv";
};

/// Writes sigma,N,es_mean,analytic,rel_err,stderr for every grid point. es_mean
/// averages `repetitions` independent estimates; stderr is that of es_mean.
int prop1(const Prop1Config& config, std::ostream& log);

struct StatsInput {
  std::string dir;
  std::string algo;  // overrides the run's label when non-empty
};

struct StatsConfig {
  std::vector<StatsInput> runs;
  std::string anchors_path;
  std::string out_path = "stats.csv";
};

/// Anchors file: CSV with header task,low,high.
struct Anchor {
  std::string task;
  double low = 0.0;
  double high = 1.0;
};
std::vector<Anchor> read_anchors(const std::string& path);

/// Builds the normalized ScoreTable from run directories (runs of the same
/// algorithm on the same task are averaged) and writes tick,algo,mean,median,best_ratio.
int stats(const StatsConfig& config, std::ostream& log);

/// The table `stats` aggregates; throws ConfigError on ragged ticks or missing anchors.
harness::ScoreTable load_score_table(const StatsConfig& config);

/// "%.9g", with nan/inf spelled out.
std::string format_number(double v);

}  // namespace ohtes::cli
