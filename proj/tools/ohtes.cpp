#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "ohtes/config.hpp"
#include "ohtes/envs.hpp"
#include "ohtes/harness.hpp"
#include "ohtes/runner.hpp"

namespace {

using namespace ohtes;

int run_command(const std::optional<std::string>& config_path, const std::vector<std::string>& sets,
                const std::vector<std::pair<std::string, std::string>>& flags) {
  cli::RunConfig config;
  try {
    if (config_path) cli::apply_config_file(config, *config_path);
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw cli::ConfigError("--set expects key=value, got '" + s + "'");
      cli::apply_setting(config, s.substr(0, eq), s.substr(eq + 1));
    }
    for (const auto& [key, value] : flags) cli::apply_setting(config, key, value);
  } catch (const cli::ConfigError& e) {
    std::cerr << "invalid config: " << e.what() << '\n';
    return cli::kExitInvalid;
  }
  return cli::run(config, std::cerr);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Online hyper-parameter tuning for off-policy actor-critics"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Train one configuration and write progress.csv");
  std::optional<std::string> config_path;
  std::vector<std::string> sets;
  std::optional<std::string> algo, env, out;
  std::optional<int> delay;
  std::optional<long long> steps;
  std::optional<unsigned long long> seed;
  run->add_option("--config", config_path, "key=value config file");
  run->add_option("--set", sets, "Extra key=value setting (repeatable)");
  run->add_option("--algo", algo, "td3 | oht-es-continuous | oht-es-cem | oht-es-discrete | metagrad | es-rl");
  run->add_option("--env", env, "pendulum | pointmass");
  run->add_option("--delay", delay, "Reward delay d");
  run->add_option("--steps", steps, "Total environment steps");
  run->add_option("--seed", seed, "Master seed");
  run->add_option("--out", out, "Output directory");

  auto* prop1 = app.add_subcommand("prop1", "ES-vs-analytic gradient check over a sigma x N grid");
  cli::Prop1Config p1;
  prop1->add_option("--sigma", p1.sigmas, "Sampling scales")->delimiter(',');
  prop1->add_option("--n", p1.ns, "Sample counts")->delimiter(',');
  prop1->add_option("--reps", p1.repetitions, "Independent estimates per grid point");
  prop1->add_option("--seed", p1.seed, "Seed");
  prop1->add_option("--out", p1.out_path, "Output CSV");

  auto* stats = app.add_subcommand("stats", "Normalized-score statistics across run directories");
  cli::StatsConfig sc;
  std::vector<std::string> run_dirs;
  stats->add_option("--anchors", sc.anchors_path, "CSV with task,low,high")->required();
  stats->add_option("--out", sc.out_path, "Output CSV");
  stats->add_option("runs", run_dirs, "Run directories, optionally NAME=DIR")->required();

  auto* baseline = app.add_subcommand("baseline", "Mean return of the uniform-random policy (the low anchor)");
  std::string baseline_env = "pendulum";
  int baseline_episodes = 100;
  unsigned long long baseline_seed = 0;
  baseline->add_option("--env", baseline_env, "Environment");
  baseline->add_option("--episodes", baseline_episodes, "Episodes");
  baseline->add_option("--seed", baseline_seed, "Seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : cli::kExitInvalid;
  }

  if (*run) {
    std::vector<std::pair<std::string, std::string>> flags;
    if (algo) flags.emplace_back("run.algo", *algo);
    if (env) flags.emplace_back("run.env", *env);
    if (delay) flags.emplace_back("run.delay", std::to_string(*delay));
    if (steps) flags.emplace_back("run.steps", std::to_string(*steps));
    if (seed) flags.emplace_back("run.seed", std::to_string(*seed));
    if (out) flags.emplace_back("run.out", *out);
    return run_command(config_path, sets, flags);
  }
  if (*prop1) return cli::prop1(p1, std::cerr);
  if (*baseline) {
    try {
      const auto env = envs::make_env(baseline_env);
      std::cout << cli::format_number(harness::random_policy_return(*env, baseline_episodes, baseline_seed)) << '\n';
    } catch (const std::invalid_argument& e) {
      std::cerr << e.what() << '\n';
      return cli::kExitInvalid;
    }
    return cli::kExitOk;
  }

  for (const auto& r : run_dirs) {
    const auto eq = r.find('=');
    if (eq == std::string::npos)
      sc.runs.push_back({r, ""});
    else
      sc.runs.push_back({r.substr(eq + 1), r.substr(0, eq)});
  }
  return cli::stats(sc, std::cerr);
}
