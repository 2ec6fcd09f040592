#include "ohtes/runner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>

#include "ohtes/envs.hpp"
#include "ohtes/errors.hpp"
#include "ohtes/metagrad.hpp"
#include "ohtes/parallel.hpp"
#include "ohtes/replay.hpp"
#include "ohtes/rollout.hpp"
#include "ohtes/tuners.hpp"

namespace ohtes::cli {

namespace fs = std::filesystem;

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string format_support(int n) { return "p_n" + std::to_string(n); }

// Owns everything a training run mutates. The algorithm decides which of the
// optional pieces exist.
class Session {
 public:
  explicit Session(const RunConfig& cfg)
      : cfg_(cfg),
        mode_(cfg.effective_tuner_mode()),
        train_env_(envs::make_env(cfg.env, cfg.delay)),
        eval_env_(envs::make_env(cfg.env, 1)),
        buffer_(static_cast<std::size_t>(cfg.replay_capacity), train_env_->spec().obs_dim,
                train_env_->spec().act_dim),
        workspace_(buffer_, *train_env_, cfg.env_seed(), worker_threads()),
        explore_rng_(cfg.explore_seed()),
        update_rng_(cfg.update_seed()),
        tuner_rng_(cfg.tuner_seed()),
        eval_rng_(derive_seed(cfg.eval_seed(), "sample")) {
    hyper_ = cfg.td3;
    hyper_.grad_steps_per_round = cfg.grad_steps.value_or(train_env_->spec().episode_len);
    const std::vector<int> hidden(static_cast<std::size_t>(cfg.hidden_layers), cfg.hidden);
    const envs::EnvSpec& spec = train_env_->spec();

    if (cfg.algo == "oht-es-discrete") {
      cat_ = tuners::make_categorical(cfg.tuner_support, cfg.tuner_epsilon, cfg.tuner_n.value_or(6),
                                      cfg.tuner_beta.value_or(0.02));
      cat_->standardize = cfg.tuner_standardize;
      for (std::size_t k = 0; k < cfg.tuner_support.size(); ++k)
        members_.push_back({td3::make_agent(spec, hidden, derive_seed(cfg.init_seed(), k)),
                            Rng(derive_seed(cfg.update_seed(), k))});
      return;
    }

    agent_ = td3::make_agent(spec, hidden, cfg.init_seed());
    if (mode_ == "es-gradient" || mode_ == "cem") {
      tuners::GaussianTunerState g;
      g.mean = cfg.tuner_mu_init;
      g.sigma.assign(g.mean.size(), cfg.tuner_sigma);
      g.beta = cfg.tuner_beta.value_or(0.1);
      g.population = cfg.tuner_n.value_or(10);
      g.mode = mode_ == "cem" ? tuners::GaussianMode::kCem : tuners::GaussianMode::kEsGradient;
      g.standardize = cfg.tuner_standardize;
      g.variance_floor = cfg.tuner_var_floor;
      g.validate();
      gauss_ = std::move(g);
    } else if (mode_ == "es-rl") {
      es_rl_ = tuners::make_es_rl(agent_, cfg.tuner_init_var, cfg.tuner_n.value_or(10), cfg.tuner_k,
                                  cfg.tuner_es_rl_floor);
    } else if (cfg.algo == "metagrad") {
      metagrad::MetaConfig mc;
      mc.beta = cfg.metagrad_beta;
      mc.tune_critic_lr = cfg.metagrad_tune_critic_lr;
      meta_ = metagrad::make_meta_state(agent_, mc, {hyper_.lr_actor, hyper_.lr_critic},
                                        derive_seed(cfg.init_seed(), "meta"));
    }
  }

  std::int64_t env_steps() const { return workspace_.env_steps(); }

  void warmup() {
    while (workspace_.env_steps() < cfg_.warmup) workspace_.collect(nullptr, 0.0, explore_rng_);
  }

  void round() {
    if (cat_) {
      tuners::DiscreteRoundConfig dc{hyper_, cfg_.tuner_train_all_agents, {}};
      last_fitness_ = tuners::oht_es_discrete_round(members_, *cat_, workspace_, dc, tuner_rng_).fitness_mean;
    } else if (gauss_) {
      tuners::ContinuousRoundConfig cc{hyper_, {}, {}};
      last_fitness_ =
          tuners::oht_es_continuous_round(agent_, update_rng_, *gauss_, workspace_, cc, tuner_rng_).fitness_mean;
    } else if (es_rl_) {
      tuners::EsRlConfig ec{hyper_, {}};
      last_fitness_ = tuners::es_rl_round(*es_rl_, workspace_, ec, update_rng_).fitness_mean;
    } else {
      const Episode ep = workspace_.collect(&agent_, hyper_.exploration_noise_std, explore_rng_);
      last_fitness_ = ep.episode_return;
      if (meta_)
        metagrad::metagrad_round(agent_, *meta_, buffer_, hyper_, update_rng_, tuner_rng_);
      else
        td3::td3_update_round(agent_, buffer_, hyper_, update_rng_);
    }
  }

  const td3::AgentParams& eval_agent() {
    if (cat_) {
      std::size_t pick = 0;
      if (cfg_.tuner_eval_sample) {
        pick = static_cast<std::size_t>(tuners::categorical_sample(*cat_, eval_rng_));
      } else {
        const auto& l = cat_->logits;
        pick = static_cast<std::size_t>(std::max_element(l.begin(), l.end()) - l.begin());
      }
      return members_[pick].agent;
    }
    if (es_rl_) return es_rl_->core;
    return agent_;
  }

  std::vector<std::string> summary_header() const {
    std::vector<std::string> h;
    if (gauss_) {
      for (std::size_t d = 0; d < gauss_->mean.size(); ++d) {
        h.push_back("mu_" + std::to_string(d));
        h.push_back("sigma_" + std::to_string(d));
      }
    } else if (cat_) {
      for (int n : cat_->support) h.push_back(format_support(n));
    } else if (meta_) {
      h = {"alpha_pi", "alpha_q"};
    } else if (es_rl_) {
      h = {"theta_var_mean"};
    }
    return h;
  }

  std::vector<double> summary() const {
    std::vector<double> v;
    if (gauss_) {
      for (std::size_t d = 0; d < gauss_->mean.size(); ++d) {
        v.push_back(gauss_->mean[d]);
        v.push_back(gauss_->sigma[d]);
      }
    } else if (cat_) {
      v = tuners::softmax(cat_->logits);
    } else if (meta_) {
      v = {meta_->alpha[0], meta_->alpha[1]};
    } else if (es_rl_) {
      double s = 0.0;
      for (float x : es_rl_->variance) s += x;
      v = {es_rl_->variance.empty() ? 0.0 : s / static_cast<double>(es_rl_->variance.size())};
    }
    return v;
  }

  double evaluate() {
    return harness::evaluate_policy(eval_agent(), *eval_env_, cfg_.eval_episodes, cfg_.eval_seed());
  }

  double last_fitness() const { return last_fitness_; }

  void write_checkpoint(const fs::path& dir) {
    fs::create_directories(dir);
    const td3::AgentParams& a = eval_agent();
    const std::pair<const char*, const net::Mlp*> nets[] = {
        {"actor.bin", &a.actor}, {"critic1.bin", &a.critic1}, {"critic2.bin", &a.critic2}};
    for (const auto& [name, mlp] : nets) {
      std::ofstream out(dir / name, std::ios::binary);
      net::write_snapshot(out, *mlp);
      if (!out) throw std::runtime_error("cannot write checkpoint " + (dir / name).string());
    }
    std::ofstream state(dir / "state.txt");
    state << "env_steps=" << env_steps() << '\n';
    const auto names = summary_header();
    const auto values = summary();
    for (std::size_t i = 0; i < names.size(); ++i) state << names[i] << '=' << format_number(values[i]) << '\n';
    if (cat_) {
      state << "logits=";
      for (std::size_t i = 0; i < cat_->logits.size(); ++i)
        state << (i ? "," : "") << format_number(cat_->logits[i]);
      state << '\n';
    }
    if (!state) throw std::runtime_error("cannot write checkpoint state");
  }

 private:
  const RunConfig& cfg_;
  std::string mode_;
  std::unique_ptr<envs::Env> train_env_;
  std::unique_ptr<envs::Env> eval_env_;
  replay::ReplayBuffer buffer_;
  Workspace workspace_;
  td3::Td3Hyper hyper_;
  Rng explore_rng_;
  Rng update_rng_;
  Rng tuner_rng_;
  Rng eval_rng_;
  td3::AgentParams agent_;
  std::vector<tuners::Member> members_;
  std::optional<tuners::GaussianTunerState> gauss_;
  std::optional<tuners::CategoricalTunerState> cat_;
  std::optional<tuners::EsRlState> es_rl_;
  std::optional<metagrad::MetaState> meta_;
  double last_fitness_ = kNaN;
};

void write_row(std::ostream& out, std::int64_t step, double eval_return, double fitness,
               const std::vector<double>& summary) {
  out << step << ',' << format_number(eval_return) << ',' << format_number(fitness);
  for (double v : summary) out << ',' << format_number(v);
  out << '\n';
  out.flush();
}

}  // namespace

int run(const RunConfig& config, std::ostream& log) {
  try {
    config.validate();
  } catch (const ConfigError& e) {
    log << "invalid config: " << e.what() << '\n';
    return kExitInvalid;
  }

  const fs::path out_dir(config.out_dir);
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) {
    log << "cannot create " << out_dir << ": " << ec.message() << '\n';
    return kExitIo;
  }
  {
    std::ofstream cfg_out(out_dir / "run_config.txt");
    cfg_out << to_settings_text(config);
    if (!cfg_out) {
      log << "cannot write run_config.txt\n";
      return kExitIo;
    }
  }

  std::unique_ptr<Session> session;
  try {
    session = std::make_unique<Session>(config);
  } catch (const std::invalid_argument& e) {
    log << "invalid config: " << e.what() << '\n';
    return kExitInvalid;
  }

  std::ofstream progress(out_dir / "progress.csv", std::ios::binary);
  if (!progress) {
    log << "cannot write progress.csv\n";
    return kExitIo;
  }
  progress << "step,eval_return,fitness_mean";
  for (const auto& name : session->summary_header()) progress << ',' << name;
  progress << '\n';

  std::int64_t next_eval = config.eval_every;
  auto emit_rows = [&] {
    while (next_eval <= session->env_steps() && next_eval <= config.total_steps) {
      write_row(progress, next_eval, session->evaluate(), session->last_fitness(), session->summary());
      next_eval += config.eval_every;
    }
  };

  try {
    session->warmup();
    emit_rows();
    while (session->env_steps() < config.total_steps) {
      session->round();
      emit_rows();
    }
  } catch (const NumericError& e) {
    log << "numeric failure at step " << session->env_steps() << ": " << e.what() << '\n';
    try {
      session->write_checkpoint(out_dir / "checkpoint");
    } catch (const std::exception& ce) {
      log << "checkpoint failed: " << ce.what() << '\n';
    }
    return kExitNumeric;
  }

  try {
    session->write_checkpoint(out_dir / "checkpoint");
  } catch (const std::exception& e) {
    log << e.what() << '\n';
    return kExitIo;
  }
  return kExitOk;
}

int prop1(const Prop1Config& config, std::ostream& log) {
  if (config.sigmas.empty() || config.ns.empty() || config.repetitions < 1) {
    log << "prop1: need at least one sigma, one N and one repetition\n";
    return kExitInvalid;
  }
  const harness::Prop1Problem problem = harness::make_scalar_prop1(config.a, config.b, config.psi, config.g, config.mu);
  std::ofstream out(config.out_path, std::ios::binary);
  if (!out) {
    log << "cannot write " << config.out_path << '\n';
    return kExitIo;
  }
  out << "sigma,N,es_mean,analytic,rel_err,stderr\n";
  std::uint64_t cell = 0;
  try {
    for (double sigma : config.sigmas) {
      for (std::int64_t n : config.ns) {
        Rng rng(derive_seed(config.seed, cell++));
        double sum = 0.0, sum_sq = 0.0, analytic = 0.0, single_se = 0.0;
        for (int r = 0; r < config.repetitions; ++r) {
          const harness::Prop1Result res = harness::prop1_check(problem, sigma, n, rng);
          sum += res.es_estimate;
          sum_sq += res.es_estimate * res.es_estimate;
          analytic = res.analytic;
          single_se = res.standard_error;
        }
        const double reps = config.repetitions;
        const double mean = sum / reps;
        double se = single_se;
        if (config.repetitions > 1) {
          const double var = std::max(0.0, (sum_sq - reps * mean * mean) / (reps - 1.0));
          se = std::sqrt(var / reps);
        }
        const double err = std::abs(mean - analytic);
        const double rel = std::abs(analytic) < 1e-12 ? err : err / std::abs(analytic);
        out << format_number(sigma) << ',' << n << ',' << format_number(mean) << ',' << format_number(analytic) << ','
            << format_number(rel) << ',' << format_number(se) << '\n';
      }
    }
  } catch (const std::invalid_argument& e) {
    log << "prop1: " << e.what() << '\n';
    return kExitInvalid;
  }
  return out ? kExitOk : kExitIo;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct RunCurve {
  std::string dir;
  std::string algo;
  std::string task;
  std::string env;
  std::vector<std::int64_t> steps;
  std::vector<double> returns;
};

RunCurve load_run(const StatsInput& input) {
  RunCurve curve;
  curve.dir = input.dir;
  const fs::path dir(input.dir);
  RunConfig rc;
  apply_settings_text(rc, read_file(dir / "run_config.txt"));
  curve.algo = input.algo.empty() ? rc.algo_label() : input.algo;
  curve.task = rc.task_name();
  curve.env = rc.env;

  std::istringstream in(read_file(dir / "progress.csv"));
  std::string line;
  if (!std::getline(in, line)) throw ConfigError(input.dir + ": empty progress.csv");
  const auto header = split_csv_line(line);
  const auto col = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw ConfigError(input.dir + ": progress.csv lacks column " + name);
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t step_col = col("step"), ret_col = col("eval_return");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size()) throw ConfigError(input.dir + ": malformed progress.csv row");
    curve.steps.push_back(std::stoll(cells[step_col]));
    curve.returns.push_back(std::stod(cells[ret_col]));
  }
  return curve;
}

template <typename T>
std::size_t index_of(std::vector<T>& names, const T& name) {
  const auto it = std::find(names.begin(), names.end(), name);
  if (it != names.end()) return static_cast<std::size_t>(it - names.begin());
  names.push_back(name);
  return names.size() - 1;
}

}  // namespace

std::vector<Anchor> read_anchors(const std::string& path) {
  std::istringstream in(read_file(path));
  std::string line;
  if (!std::getline(in, line)) throw ConfigError(path + ": empty anchors file");
  const auto header = split_csv_line(line);
  if (header.size() < 3 || header[0] != "task" || header[1] != "low" || header[2] != "high")
    throw ConfigError(path + ": expected header task,low,high");
  std::vector<Anchor> anchors;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto cells = split_csv_line(line);
    if (cells.size() < 3) throw ConfigError(path + ": malformed row '" + line + "'");
    anchors.push_back({cells[0], std::stod(cells[1]), std::stod(cells[2])});
  }
  return anchors;
}

harness::ScoreTable load_score_table(const StatsConfig& config) {
  if (config.runs.empty()) throw ConfigError("stats: no run directories");
  const std::vector<Anchor> anchors = read_anchors(config.anchors_path);

  std::vector<RunCurve> curves;
  for (const auto& r : config.runs) curves.push_back(load_run(r));
  const std::vector<std::int64_t>& ticks = curves.front().steps;
  if (ticks.empty()) throw ConfigError("stats: " + curves.front().dir + " has no evaluation rows");
  std::string ragged;
  for (const auto& c : curves)
    if (c.steps != ticks) ragged += " " + c.dir;
  if (!ragged.empty()) throw ConfigError("stats: ticks differ from " + curves.front().dir + " in:" + ragged);

  std::vector<std::string> algos, tasks;
  for (const auto& c : curves) {
    index_of(algos, c.algo);
    index_of(tasks, c.task);
  }
  harness::ScoreTable table(algos.size(), tasks.size(), ticks.size());
  table.algos = algos;
  table.tasks = tasks;
  table.ticks = ticks;
  table.tick_steps = ticks.size() > 1 ? ticks[1] - ticks[0] : ticks[0];

  for (std::size_t j = 0; j < tasks.size(); ++j) {
    const RunCurve* example = nullptr;
    for (const auto& c : curves)
      if (c.task == tasks[j]) example = &c;
    auto it = std::find_if(anchors.begin(), anchors.end(), [&](const Anchor& a) { return a.task == tasks[j]; });
    if (it == anchors.end())
      it = std::find_if(anchors.begin(), anchors.end(), [&](const Anchor& a) { return a.task == example->env; });
    if (it == anchors.end()) throw ConfigError("stats: no anchors for task " + tasks[j]);
    if (!(it->high > it->low)) throw ConfigError("stats: anchors for " + tasks[j] + " need high > low");
    table.low[j] = it->low;
    table.high[j] = it->high;
  }

  // Runs of one algorithm on one task (different seeds) are averaged.
  std::vector<double> sums(algos.size() * tasks.size() * ticks.size(), 0.0);
  std::vector<int> counts(algos.size() * tasks.size(), 0);
  for (const auto& c : curves) {
    const std::size_t i = index_of(algos, c.algo), j = index_of(tasks, c.task);
    ++counts[i * tasks.size() + j];
    for (std::size_t t = 0; t < ticks.size(); ++t) sums[(i * tasks.size() + j) * ticks.size() + t] += c.returns[t];
  }
  for (std::size_t i = 0; i < algos.size(); ++i)
    for (std::size_t j = 0; j < tasks.size(); ++j) {
      const int n = counts[i * tasks.size() + j];
      if (n == 0) continue;
      for (std::size_t t = 0; t < ticks.size(); ++t)
        table.at(i, j, t) =
            harness::normalized_score(sums[(i * tasks.size() + j) * ticks.size() + t] / n, table.low[j], table.high[j]);
    }
  return table;
}

int stats(const StatsConfig& config, std::ostream& log) {
  harness::ScoreTable table;
  try {
    table = load_score_table(config);
  } catch (const std::invalid_argument& e) {
    log << e.what() << '\n';
    return kExitInvalid;
  }
  const harness::StatsCurves curves = harness::aggregate_stats(table);
  std::ofstream out(config.out_path, std::ios::binary);
  if (!out) {
    log << "cannot write " << config.out_path << '\n';
    return kExitIo;
  }
  out << "tick,algo,mean,median,best_ratio\n";
  for (std::size_t t = 0; t < table.num_ticks(); ++t)
    for (std::size_t i = 0; i < table.num_algos(); ++i)
      out << table.ticks[t] << ',' << table.algos[i] << ',' << format_number(curves.mean[i][t]) << ','
          << format_number(curves.median[i][t]) << ',' << format_number(curves.best_ratio[i][t]) << '\n';
  return out ? kExitOk : kExitIo;
}

}  // namespace ohtes::cli
