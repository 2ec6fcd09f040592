#include "ohtes/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "ohtes/envs.hpp"
#include "ohtes/rng.hpp"

namespace ohtes::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value) {
  throw ConfigError("invalid value for " + key + ": '" + value + "'");
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) bad_value(key, v);
    return d;
  } catch (const std::logic_error&) {
    bad_value(key, v);
  }
}

std::int64_t to_int(const std::string& key, const std::string& v) {
  std::int64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size()) bad_value(key, v);
  return out;
}

std::uint64_t to_uint(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size()) bad_value(key, v);
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  bad_value(key, v);
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> parts;
  std::string item;
  std::istringstream in(v);
  while (std::getline(in, item, ',')) parts.push_back(trim(item));
  return parts;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <typename T>
std::string join(const std::vector<T>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i > 0) out += ',';
    if constexpr (std::is_floating_point_v<T>)
      out += fmt(values[i]);
    else
      out += std::to_string(values[i]);
  }
  return out;
}

using Setter = std::function<void(RunConfig&, const std::string& key, const std::string& value)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"run.algo", [](RunConfig& c, auto&, auto& v) { c.algo = v; }},
      {"run.env", [](RunConfig& c, auto&, auto& v) { c.env = v; }},
      {"run.delay", [](RunConfig& c, auto& k, auto& v) { c.delay = static_cast<int>(to_int(k, v)); }},
      {"run.steps", [](RunConfig& c, auto& k, auto& v) { c.total_steps = to_int(k, v); }},
      {"run.seed", [](RunConfig& c, auto& k, auto& v) { c.seed = to_uint(k, v); }},
      {"run.out", [](RunConfig& c, auto&, auto& v) { c.out_dir = v; }},
      {"run.label", [](RunConfig& c, auto&, auto& v) { c.label = v; }},
      {"run.eval_every", [](RunConfig& c, auto& k, auto& v) { c.eval_every = to_int(k, v); }},
      {"run.eval_episodes", [](RunConfig& c, auto& k, auto& v) { c.eval_episodes = static_cast<int>(to_int(k, v)); }},
      {"run.warmup", [](RunConfig& c, auto& k, auto& v) { c.warmup = to_int(k, v); }},
      {"net.hidden", [](RunConfig& c, auto& k, auto& v) { c.hidden = static_cast<int>(to_int(k, v)); }},
      {"net.layers", [](RunConfig& c, auto& k, auto& v) { c.hidden_layers = static_cast<int>(to_int(k, v)); }},
      {"td3.lr_actor", [](RunConfig& c, auto& k, auto& v) { c.td3.lr_actor = to_double(k, v); }},
      {"td3.lr_critic", [](RunConfig& c, auto& k, auto& v) { c.td3.lr_critic = to_double(k, v); }},
      {"td3.n_step", [](RunConfig& c, auto& k, auto& v) { c.td3.n_step = static_cast<int>(to_int(k, v)); }},
      {"td3.gamma", [](RunConfig& c, auto& k, auto& v) { c.td3.gamma = to_double(k, v); }},
      {"td3.polyak", [](RunConfig& c, auto& k, auto& v) { c.td3.polyak = to_double(k, v); }},
      {"td3.policy_delay",
       [](RunConfig& c, auto& k, auto& v) { c.td3.policy_delay = static_cast<int>(to_int(k, v)); }},
      {"td3.target_noise", [](RunConfig& c, auto& k, auto& v) { c.td3.target_noise_std = to_double(k, v); }},
      {"td3.target_noise_clip", [](RunConfig& c, auto& k, auto& v) { c.td3.target_noise_clip = to_double(k, v); }},
      {"td3.explore_noise", [](RunConfig& c, auto& k, auto& v) { c.td3.exploration_noise_std = to_double(k, v); }},
      {"td3.batch_size", [](RunConfig& c, auto& k, auto& v) { c.td3.batch_size = static_cast<int>(to_int(k, v)); }},
      {"td3.grad_steps", [](RunConfig& c, auto& k, auto& v) { c.grad_steps = static_cast<int>(to_int(k, v)); }},
      {"replay.capacity", [](RunConfig& c, auto& k, auto& v) { c.replay_capacity = to_int(k, v); }},
      {"tuner.mode", [](RunConfig& c, auto&, auto& v) { c.tuner_mode = v; }},
      {"tuner.N", [](RunConfig& c, auto& k, auto& v) { c.tuner_n = static_cast<int>(to_int(k, v)); }},
      {"tuner.beta", [](RunConfig& c, auto& k, auto& v) { c.tuner_beta = to_double(k, v); }},
      {"tuner.sigma", [](RunConfig& c, auto& k, auto& v) { c.tuner_sigma = to_double(k, v); }},
      {"tuner.mu_init", [](RunConfig& c, auto&, auto& v) { c.tuner_mu_init = parse_double_list(v); }},
      {"tuner.epsilon", [](RunConfig& c, auto& k, auto& v) { c.tuner_epsilon = to_double(k, v); }},
      {"tuner.support", [](RunConfig& c, auto&, auto& v) { c.tuner_support = parse_int_list(v); }},
      {"tuner.train_all_agents", [](RunConfig& c, auto& k, auto& v) { c.tuner_train_all_agents = to_bool(k, v); }},
      {"tuner.standardize", [](RunConfig& c, auto& k, auto& v) { c.tuner_standardize = to_bool(k, v); }},
      {"tuner.var_floor", [](RunConfig& c, auto& k, auto& v) { c.tuner_var_floor = to_double(k, v); }},
      {"tuner.eval_sample", [](RunConfig& c, auto& k, auto& v) { c.tuner_eval_sample = to_bool(k, v); }},
      {"tuner.k", [](RunConfig& c, auto& k, auto& v) { c.tuner_k = static_cast<int>(to_int(k, v)); }},
      {"tuner.init_var", [](RunConfig& c, auto& k, auto& v) { c.tuner_init_var = to_double(k, v); }},
      {"tuner.es_rl_floor", [](RunConfig& c, auto& k, auto& v) { c.tuner_es_rl_floor = to_double(k, v); }},
      {"metagrad.beta", [](RunConfig& c, auto& k, auto& v) { c.metagrad_beta = to_double(k, v); }},
      {"metagrad.tune_critic_lr", [](RunConfig& c, auto& k, auto& v) { c.metagrad_tune_critic_lr = to_bool(k, v); }},
      {"seed.env", [](RunConfig& c, auto& k, auto& v) { c.seed_env = to_uint(k, v); }},
      {"seed.init", [](RunConfig& c, auto& k, auto& v) { c.seed_init = to_uint(k, v); }},
      {"seed.tuner", [](RunConfig& c, auto& k, auto& v) { c.seed_tuner = to_uint(k, v); }},
      {"seed.explore", [](RunConfig& c, auto& k, auto& v) { c.seed_explore = to_uint(k, v); }},
  };
  return table;
}

const std::map<std::string, std::string>& algo_modes() {
  static const std::map<std::string, std::string> table = {
      {"td3", "none"},           {"oht-es-continuous", "es-gradient"}, {"oht-es-cem", "cem"},
      {"oht-es-discrete", "categorical"}, {"metagrad", "none"},        {"es-rl", "es-rl"},
  };
  return table;
}

}  // namespace

std::vector<double> parse_double_list(const std::string& value) {
  std::vector<double> out;
  for (const auto& p : split_list(value)) out.push_back(to_double("list", p));
  if (out.empty()) throw ConfigError("empty list");
  return out;
}

std::vector<int> parse_int_list(const std::string& value) {
  std::vector<int> out;
  for (const auto& p : split_list(value)) out.push_back(static_cast<int>(to_int("list", p)));
  if (out.empty()) throw ConfigError("empty list");
  return out;
}

std::string RunConfig::effective_tuner_mode() const {
  const auto it = algo_modes().find(algo);
  if (it == algo_modes().end()) throw ConfigError("unknown algo: " + algo);
  if (tuner_mode && *tuner_mode != it->second)
    throw ConfigError("tuner.mode=" + *tuner_mode + " does not match algo " + algo + " (expects " + it->second + ")");
  return it->second;
}

std::string RunConfig::task_name() const { return delay > 1 ? env + "-d" + std::to_string(delay) : env; }

std::uint64_t RunConfig::env_seed() const { return seed_env.value_or(derive_seed(seed, "env")); }
std::uint64_t RunConfig::init_seed() const { return seed_init.value_or(derive_seed(seed, "init")); }
std::uint64_t RunConfig::tuner_seed() const { return seed_tuner.value_or(derive_seed(seed, "tuner")); }
std::uint64_t RunConfig::explore_seed() const { return seed_explore.value_or(derive_seed(seed, "explore")); }
std::uint64_t RunConfig::update_seed() const { return derive_seed(seed, "update"); }
std::uint64_t RunConfig::eval_seed() const { return derive_seed(seed, "eval"); }

void RunConfig::validate() const {
  const std::string mode = effective_tuner_mode();
  if (!envs::is_known_env(env)) throw ConfigError("unknown env: " + env);
  if (delay < 1) throw ConfigError("run.delay must be >= 1");
  if (total_steps < 1) throw ConfigError("run.steps must be >= 1");
  if (warmup < 0 || warmup > total_steps) throw ConfigError("run.warmup must lie in [0, run.steps]");
  if (eval_every < 1) throw ConfigError("run.eval_every must be >= 1");
  if (eval_episodes < 1) throw ConfigError("run.eval_episodes must be >= 1");
  if (out_dir.empty()) throw ConfigError("run.out must be set");
  if (hidden < 1 || hidden_layers < 0) throw ConfigError("net.hidden must be >= 1 and net.layers >= 0");
  if (grad_steps && *grad_steps < 0) throw ConfigError("td3.grad_steps must be >= 0");
  if (replay_capacity < 1) throw ConfigError("replay.capacity must be >= 1");
  try {
    td3.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (tuner_n && *tuner_n < (mode == "categorical" ? 1 : 2)) throw ConfigError("tuner.N too small");
  if (!(tuner_sigma > 0.0)) throw ConfigError("tuner.sigma must be > 0");
  if (tuner_mu_init.empty() || tuner_mu_init.size() > 2) throw ConfigError("tuner.mu_init takes one or two values");
  if (!(tuner_epsilon >= 0.0 && tuner_epsilon <= 1.0)) throw ConfigError("tuner.epsilon must lie in [0, 1]");
  for (int n : tuner_support)
    if (n < 1) throw ConfigError("tuner.support values must be >= 1");
  if (tuner_beta && !(*tuner_beta >= 0.0)) throw ConfigError("tuner.beta must be >= 0");
  if (!(tuner_var_floor >= 0.0)) throw ConfigError("tuner.var_floor must be >= 0");
  if (mode == "es-rl" && (tuner_k < 0 || tuner_k > tuner_n.value_or(10)))
    throw ConfigError("tuner.k must lie in [0, tuner.N]");
  if (!(metagrad_beta >= 0.0)) throw ConfigError("metagrad.beta must be >= 0");
}

void apply_setting(RunConfig& config, const std::string& key, const std::string& value) {
  const auto it = setters().find(key);
  if (it == setters().end()) throw ConfigError("unknown config key: " + key);
  it->second(config, key, trim(value));
}

std::vector<std::pair<std::string, std::string>> parse_settings(const std::string& text) {
  std::vector<std::pair<std::string, std::string>> out;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key=value");
    out.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return out;
}

void apply_settings_text(RunConfig& config, const std::string& text) {
  for (const auto& [k, v] : parse_settings(text)) apply_setting(config, k, v);
}

void apply_config_file(RunConfig& config, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  apply_settings_text(config, ss.str());
}

std::string to_settings_text(const RunConfig& c) {
  std::ostringstream o;
  o << "run.algo=" << c.algo << '\n'
    << "run.env=" << c.env << '\n'
    << "run.delay=" << c.delay << '\n'
    << "run.steps=" << c.total_steps << '\n'
    << "run.seed=" << c.seed << '\n'
    << "run.out=" << c.out_dir << '\n';
  if (!c.label.empty()) o << "run.label=" << c.label << '\n';
  o << "run.eval_every=" << c.eval_every << '\n'
    << "run.eval_episodes=" << c.eval_episodes << '\n'
    << "run.warmup=" << c.warmup << '\n'
    << "net.hidden=" << c.hidden << '\n'
    << "net.layers=" << c.hidden_layers << '\n'
    << "td3.lr_actor=" << fmt(c.td3.lr_actor) << '\n'
    << "td3.lr_critic=" << fmt(c.td3.lr_critic) << '\n'
    << "td3.n_step=" << c.td3.n_step << '\n'
    << "td3.gamma=" << fmt(c.td3.gamma) << '\n'
    << "td3.polyak=" << fmt(c.td3.polyak) << '\n'
    << "td3.policy_delay=" << c.td3.policy_delay << '\n'
    << "td3.target_noise=" << fmt(c.td3.target_noise_std) << '\n'
    << "td3.target_noise_clip=" << fmt(c.td3.target_noise_clip) << '\n'
    << "td3.explore_noise=" << fmt(c.td3.exploration_noise_std) << '\n'
    << "td3.batch_size=" << c.td3.batch_size << '\n';
  if (c.grad_steps) o << "td3.grad_steps=" << *c.grad_steps << '\n';
  o << "replay.capacity=" << c.replay_capacity << '\n';
  if (c.tuner_mode) o << "tuner.mode=" << *c.tuner_mode << '\n';
  if (c.tuner_n) o << "tuner.N=" << *c.tuner_n << '\n';
  if (c.tuner_beta) o << "tuner.beta=" << fmt(*c.tuner_beta) << '\n';
  o << "tuner.sigma=" << fmt(c.tuner_sigma) << '\n'
    << "tuner.mu_init=" << join(c.tuner_mu_init) << '\n'
    << "tuner.epsilon=" << fmt(c.tuner_epsilon) << '\n'
    << "tuner.support=" << join(c.tuner_support) << '\n'
    << "tuner.train_all_agents=" << (c.tuner_train_all_agents ? "true" : "false") << '\n'
    << "tuner.standardize=" << (c.tuner_standardize ? "true" : "false") << '\n'
    << "tuner.var_floor=" << fmt(c.tuner_var_floor) << '\n'
    << "tuner.eval_sample=" << (c.tuner_eval_sample ? "true" : "false") << '\n'
    << "tuner.k=" << c.tuner_k << '\n'
    << "tuner.init_var=" << fmt(c.tuner_init_var) << '\n'
    << "tuner.es_rl_floor=" << fmt(c.tuner_es_rl_floor) << '\n'
    << "metagrad.beta=" << fmt(c.metagrad_beta) << '\n'
    << "metagrad.tune_critic_lr=" << (c.metagrad_tune_critic_lr ? "true" : "false") << '\n'
    << "seed.env=" << c.env_seed() << '\n'
    << "seed.init=" << c.init_seed() << '\n'
    << "seed.tuner=" << c.tuner_seed() << '\n'
    << "seed.explore=" << c.explore_seed() << '\n';
  return o.str();
}

}  // namespace ohtes::cli
