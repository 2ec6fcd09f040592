#pragma once

// Run configuration: flat `section.key=value` text, one setting per line, `#`
// comments. Later settings override earlier ones, so CLI flags are applied
// after the file.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ohtes/td3.hpp"

namespace ohtes::cli {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct RunConfig {
  // run.*
  std::string algo = "td3";
  std::string env = "pendulum";
  int delay = 1;
  std::int64_t total_steps = 100000;
  std::uint64_t seed = 0;
  std::string out_dir = "run";
  std::string label;  // algorithm name in stats tables; defaults to algo
  std::int64_t eval_every = 2000;
  int eval_episodes = 5;
  std::int64_t warmup = 1000;

  // net.*
  int hidden = 300;
  int hidden_layers = 2;

  // td3.*; grad_steps unset means one gradient step per collected transition
  td3::Td3Hyper td3;
  std::optional<int> grad_steps;

  // replay.*
  std::int64_t replay_capacity = 100000;

  // tuner.*
  std::optional<std::string> tuner_mode;
  std::optional<int> tuner_n;
  std::optional<double> tuner_beta;
  double tuner_sigma = 0.5;
  std::vector<double> tuner_mu_init{-3.0, -3.0};
  double tuner_epsilon = 0.1;
  std::vector<int> tuner_support{1, 2, 3, 4, 5};
  bool tuner_train_all_agents = true;
  bool tuner_standardize = true;
  double tuner_var_floor = 1e-4;
  bool tuner_eval_sample = false;
  int tuner_k = 5;                  // es-rl trained members
  double tuner_init_var = 1e-3;     // es-rl
  double tuner_es_rl_floor = 1e-5;  // es-rl

  // metagrad.*
  double metagrad_beta = 1e-4;
  bool metagrad_tune_critic_lr = false;

  // seed.* overrides of the derived stream seeds
  std::optional<std::uint64_t> seed_env;
  std::optional<std::uint64_t> seed_init;
  std::optional<std::uint64_t> seed_tuner;
  std::optional<std::uint64_t> seed_explore;

  /// tuner.mode implied by algo, checked against an explicit tuner.mode.
  std::string effective_tuner_mode() const;
  std::string algo_label() const { return label.empty() ? algo : label; }
  /// Name of the task in stats tables: env, with a -d<delay> suffix when delayed.
  std::string task_name() const;

  std::uint64_t env_seed() const;
  std::uint64_t init_seed() const;
  std::uint64_t tuner_seed() const;
  std::uint64_t explore_seed() const;
  std::uint64_t update_seed() const;
  std::uint64_t eval_seed() const;

  /// Throws ConfigError on unknown algo/env or out-of-range values.
  void validate() const;
};

/// Applies one setting. Throws ConfigError on an unknown key or bad value.
void apply_setting(RunConfig& config, const std::string& key, const std::string& value);

/// Parses `key=value` lines (blank lines and `#` comments skipped).
std::vector<std::pair<std::string, std::string>> parse_settings(const std::string& text);

void apply_settings_text(RunConfig& config, const std::string& text);
void apply_config_file(RunConfig& config, const std::string& path);

/// Every setting, one `key=value` per line, in a form apply_settings_text reads back.
std::string to_settings_text(const RunConfig& config);

std::vector<double> parse_double_list(const std::string& value);
std::vector<int> parse_int_list(const std::string& value);

}  // namespace ohtes::cli
