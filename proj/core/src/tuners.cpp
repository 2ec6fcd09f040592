#include "ohtes/tuners.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "ohtes/errors.hpp"
#include "ohtes/parallel.hpp"

namespace ohtes::tuners {

void GaussianTunerState::validate() const {
  if (mean.empty() || mean.size() != sigma.size())
    throw std::invalid_argument("gaussian tuner: mean and sigma must be non-empty and the same size");
  for (double s : sigma)
    if (!(s > 0.0) || !std::isfinite(s)) throw std::invalid_argument("gaussian tuner: sigma must be positive");
  if (population < 2) throw std::invalid_argument("gaussian tuner: population must be >= 2");
  if (!(beta >= 0.0)) throw std::invalid_argument("gaussian tuner: beta must be >= 0");
  if (!(variance_floor >= 0.0)) throw std::invalid_argument("gaussian tuner: variance floor must be >= 0");
}

GaussianSample gaussian_sample(const GaussianTunerState& state, Rng& rng) {
  state.validate();
  GaussianSample out;
  const std::size_t dims = state.mean.size();
  for (int j = 0; j < state.population; ++j) {
    std::vector<double> noise(dims);
    std::vector<double> eta(dims);
    for (std::size_t d = 0; d < dims; ++d) {
      noise[d] = rng.normal();
      eta[d] = state.mean[d] + state.sigma[d] * noise[d];
    }
    out.noises.push_back(std::move(noise));
    out.etas.push_back(std::move(eta));
  }
  return out;
}

std::vector<double> standardize_fitness(std::span<const double> fitness) {
  if (fitness.empty()) return {};
  const double n = static_cast<double>(fitness.size());
  const double mean = std::accumulate(fitness.begin(), fitness.end(), 0.0) / n;
  double var = 0.0;
  for (double f : fitness) var += (f - mean) * (f - mean);
  const double stddev = std::sqrt(var / n);
  std::vector<double> out(fitness.size());
  for (std::size_t i = 0; i < fitness.size(); ++i) out[i] = (fitness[i] - mean) / (stddev + 1e-8);
  return out;
}

namespace {

std::vector<double> checked_fitness(std::span<const FitnessRecord> records, bool standardize) {
  std::vector<double> f;
  f.reserve(records.size());
  for (const auto& r : records) {
    if (!std::isfinite(r.fitness)) throw NumericError("tuner update: non-finite fitness");
    f.push_back(r.fitness);
  }
  return standardize ? standardize_fitness(f) : f;
}

}  // namespace

void es_gradient_update(GaussianTunerState& state, std::span<const FitnessRecord> records) {
  state.validate();
  if (state.mode != GaussianMode::kEsGradient) throw std::invalid_argument("es_gradient_update: tuner is in cem mode");
  if (records.size() != static_cast<std::size_t>(state.population))
    throw std::invalid_argument("es_gradient_update: expected " + std::to_string(state.population) + " records");
  const std::vector<double> f = checked_fitness(records, state.standardize);
  const double n = static_cast<double>(records.size());
  std::vector<double> next = state.mean;
  for (std::size_t d = 0; d < state.mean.size(); ++d) {
    double acc = 0.0;
    for (std::size_t j = 0; j < records.size(); ++j) {
      if (records[j].eta.size() != state.mean.size()) throw std::invalid_argument("es_gradient_update: eta size");
      acc += f[j] * (records[j].eta[d] - state.mean[d]) / state.sigma[d];
    }
    next[d] = state.mean[d] + state.beta / (state.sigma[d] * n) * acc;
  }
  state.mean = std::move(next);
}

std::vector<std::size_t> elite_indices(std::span<const FitnessRecord> records) {
  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return records[a].fitness > records[b].fitness; });
  order.resize((records.size() + 1) / 2);
  return order;
}

void cem_update(GaussianTunerState& state, std::span<const FitnessRecord> records) {
  state.validate();
  if (state.mode != GaussianMode::kCem) throw std::invalid_argument("cem_update: tuner is not in cem mode");
  if (records.size() < 2) throw std::invalid_argument("cem_update: need at least two records");
  for (const auto& r : records) {
    if (!std::isfinite(r.fitness)) throw NumericError("cem_update: non-finite fitness");
    if (r.eta.size() != state.mean.size()) throw std::invalid_argument("cem_update: eta size");
  }
  const std::vector<std::size_t> elites = elite_indices(records);
  const double k = static_cast<double>(elites.size());
  for (std::size_t d = 0; d < state.mean.size(); ++d) {
    double mu = 0.0;
    for (std::size_t e : elites) mu += records[e].eta[d];
    mu /= k;
    double var = 0.0;
    for (std::size_t e : elites) var += (records[e].eta[d] - mu) * (records[e].eta[d] - mu);
    var = var / k + state.variance_floor;
    state.mean[d] = mu;
    state.sigma[d] = std::sqrt(var);
  }
}

void CategoricalTunerState::validate() const {
  if (logits.empty()) throw std::invalid_argument("categorical tuner: need at least one logit");
  if (support.size() != logits.size()) throw std::invalid_argument("categorical tuner: support size != logits size");
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw std::invalid_argument("categorical tuner: epsilon must lie in [0, 1]");
  if (samples_per_update < 1) throw std::invalid_argument("categorical tuner: samples_per_update must be >= 1");
}

CategoricalTunerState make_categorical(std::vector<int> support, double epsilon, int samples_per_update,
                                       double beta) {
  CategoricalTunerState state;
  state.logits.assign(support.size(), 0.0);
  state.adam = net::adam_init<double>(support.size());
  state.support = std::move(support);
  state.epsilon = epsilon;
  state.samples_per_update = samples_per_update;
  state.beta = beta;
  state.validate();
  return state;
}

std::vector<double> softmax(std::span<const double> logits) {
  const double max = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - max);
    total += p[i];
  }
  for (double& x : p) x /= total;
  return p;
}

std::vector<double> sampling_probabilities(const CategoricalTunerState& state) {
  std::vector<double> p = softmax(state.logits);
  const double k = static_cast<double>(p.size());
  for (double& x : p) x = (1.0 - state.epsilon) * x + state.epsilon / k;
  return p;
}

int categorical_sample(const CategoricalTunerState& state, Rng& rng) {
  state.validate();
  const std::size_t k = state.logits.size();
  if (rng.uniform() < state.epsilon) return static_cast<int>(rng.below(k));
  const std::vector<double> p = softmax(state.logits);
  const double u = rng.uniform();
  double cdf = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    cdf += p[i];
    if (u < cdf) return static_cast<int>(i);
  }
  return static_cast<int>(k - 1);
}

std::vector<double> score_function_direction(const CategoricalTunerState& state,
                                             std::span<const FitnessRecord> records) {
  state.validate();
  if (records.empty()) throw std::invalid_argument("score_function_direction: no records");
  const std::vector<double> f = checked_fitness(records, state.standardize);
  const std::vector<double> p = softmax(state.logits);
  const std::size_t k = p.size();
  std::vector<double> dir(k, 0.0);
  for (std::size_t j = 0; j < records.size(); ++j) {
    const int idx = records[j].index;
    if (idx < 0 || static_cast<std::size_t>(idx) >= k)
      throw std::invalid_argument("score_function_direction: record index out of range");
    for (std::size_t i = 0; i < k; ++i) dir[i] += f[j] * ((static_cast<std::size_t>(idx) == i ? 1.0 : 0.0) - p[i]);
  }
  const double n = static_cast<double>(records.size());
  for (double& d : dir) d /= n;
  return dir;
}

void score_function_update(CategoricalTunerState& state, std::span<const FitnessRecord> records) {
  const std::vector<double> dir = score_function_direction(state, records);
  std::vector<double> descent(dir.size());
  for (std::size_t i = 0; i < dir.size(); ++i) descent[i] = -dir[i];
  net::adam_step<double>(state.logits, descent, state.adam, state.beta);
  const double mean = std::accumulate(state.logits.begin(), state.logits.end(), 0.0) /
                      static_cast<double>(state.logits.size());
  for (double& l : state.logits) l -= mean;
}

double fitness_estimate(std::span<const double> returns) {
  if (returns.empty()) throw Unavailable("fitness_estimate: no episode returns");
  return std::accumulate(returns.begin(), returns.end(), 0.0) / static_cast<double>(returns.size());
}

double learning_rate_from_log10(double log10_lr, LearningRateBounds bounds) {
  return std::clamp(std::pow(10.0, log10_lr), bounds.min, bounds.max);
}

td3::Td3Hyper with_learning_rates(const td3::Td3Hyper& base, std::span<const double> log10_lrs,
                                  LearningRateBounds bounds) {
  td3::Td3Hyper h = base;
  if (log10_lrs.size() == 1) {
    h.lr_actor = h.lr_critic = learning_rate_from_log10(log10_lrs[0], bounds);
  } else if (log10_lrs.size() == 2) {
    h.lr_actor = learning_rate_from_log10(log10_lrs[0], bounds);
    h.lr_critic = learning_rate_from_log10(log10_lrs[1], bounds);
  } else {
    throw std::invalid_argument("with_learning_rates: expected one or two log10 learning rates");
  }
  return h;
}

namespace {

double apply_probe(const FitnessProbe& probe, const Eta& eta, double episode_return) {
  const double f = probe ? probe(eta, episode_return) : episode_return;
  if (!std::isfinite(f)) throw NumericError("non-finite fitness");
  return f;
}

void summarize(RoundMetrics& m) {
  m.fitness_mean = m.fitness.empty() ? 0.0 : fitness_estimate(m.fitness);
}

}  // namespace

RoundMetrics oht_es_continuous_round(td3::AgentParams& main_agent, Rng& main_rng, GaussianTunerState& tuner,
                                     Workspace& workspace, const ContinuousRoundConfig& config, Rng& tuner_rng) {
  const GaussianSample sample = gaussian_sample(tuner, tuner_rng);
  const auto n = static_cast<std::size_t>(tuner.population);
  std::vector<std::uint64_t> clone_seeds(n);
  for (auto& s : clone_seeds) s = tuner_rng.next();

  const std::int64_t inserted_before = workspace.buffer().total_appended();
  const std::int64_t first_id = workspace.reserve_episodes(static_cast<std::int64_t>(n));
  std::vector<Episode> episodes(n);
  // The buffer is read-only while clones train; their episodes are appended
  // afterwards in clone order.
  parallel_for(n, workspace.threads(), [&](std::size_t j) {
    td3::AgentParams clone = main_agent;
    Rng rng(clone_seeds[j]);
    const td3::Td3Hyper h = with_learning_rates(config.hyper, sample.etas[j], config.bounds);
    td3::td3_update_round(clone, workspace.buffer(), h, rng);
    auto env = workspace.env().clone();
    const std::int64_t id = first_id + static_cast<std::int64_t>(j);
    episodes[j] = run_episode(&clone, *env, workspace.episode_seed(id), h.exploration_noise_std, rng, id);
  });

  RoundMetrics metrics;
  std::vector<FitnessRecord> records;
  for (std::size_t j = 0; j < n; ++j) {
    workspace.commit(episodes[j]);
    metrics.env_steps += static_cast<std::int64_t>(episodes[j].transitions.size());
    FitnessRecord rec;
    rec.eta = sample.etas[j];
    rec.fitness = apply_probe(config.probe, Eta{sample.etas[j], -1}, episodes[j].episode_return);
    rec.agent_index = static_cast<int>(j);
    metrics.fitness.push_back(rec.fitness);
    records.push_back(std::move(rec));
  }
  if (tuner.mode == GaussianMode::kEsGradient)
    es_gradient_update(tuner, records);
  else
    cem_update(tuner, records);

  const td3::Td3Hyper central = with_learning_rates(config.hyper, tuner.mean, config.bounds);
  td3::td3_update_round(main_agent, workspace.buffer(), central, main_rng);
  const Episode main_episode = workspace.collect(&main_agent, central.exploration_noise_std, main_rng);
  metrics.env_steps += static_cast<std::int64_t>(main_episode.transitions.size());
  metrics.episodes = static_cast<int>(n) + 1;
  metrics.buffer_insertions = workspace.buffer().total_appended() - inserted_before;
  summarize(metrics);
  return metrics;
}

RoundMetrics oht_es_discrete_round(std::vector<Member>& agents, CategoricalTunerState& tuner, Workspace& workspace,
                                   const DiscreteRoundConfig& config, Rng& tuner_rng) {
  tuner.validate();
  if (agents.size() != tuner.size()) throw std::invalid_argument("discrete round: one agent per support value");
  const std::int64_t inserted_before = workspace.buffer().total_appended();
  RoundMetrics metrics;
  std::vector<FitnessRecord> records;
  for (int s = 0; s < tuner.samples_per_update; ++s) {
    const int j = categorical_sample(tuner, tuner_rng);
    Member& chosen = agents[static_cast<std::size_t>(j)];
    const Episode episode = workspace.collect(&chosen.agent, config.hyper.exploration_noise_std, chosen.rng);
    metrics.env_steps += static_cast<std::int64_t>(episode.transitions.size());
    ++metrics.episodes;

    FitnessRecord rec;
    rec.index = j;
    rec.agent_index = j;
    rec.fitness = apply_probe(config.probe, Eta{{}, j}, episode.episode_return);
    metrics.fitness.push_back(rec.fitness);
    records.push_back(rec);

    auto train = [&](std::size_t k) {
      td3::Td3Hyper h = config.hyper;
      h.n_step = tuner.support[k];
      td3::td3_update_round(agents[k].agent, workspace.buffer(), h, agents[k].rng);
    };
    if (config.train_all_agents)
      parallel_for(agents.size(), workspace.threads(), train);
    else
      train(static_cast<std::size_t>(j));
  }
  score_function_update(tuner, records);
  metrics.buffer_insertions = workspace.buffer().total_appended() - inserted_before;
  summarize(metrics);
  return metrics;
}

EsRlState make_es_rl(td3::AgentParams core, double initial_variance, int population, int trained_members,
                     double variance_floor) {
  if (population < 2 || trained_members < 0 || trained_members > population)
    throw std::invalid_argument("make_es_rl: need population >= 2 and 0 <= trained_members <= population");
  if (!(initial_variance >= 0.0) || !(variance_floor >= 0.0))
    throw std::invalid_argument("make_es_rl: variances must be >= 0");
  EsRlState state;
  state.mean = core.actor.flatten();
  state.variance.assign(state.mean.size(), static_cast<float>(initial_variance));
  state.core = std::move(core);
  state.population = population;
  state.trained_members = trained_members;
  state.variance_floor = variance_floor;
  return state;
}

RoundMetrics es_rl_round(EsRlState& state, Workspace& workspace, const EsRlConfig& config, Rng& rng) {
  const auto n = static_cast<std::size_t>(state.population);
  const std::size_t dims = state.mean.size();
  std::vector<std::vector<float>> thetas(n, std::vector<float>(dims));
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t d = 0; d < dims; ++d)
      thetas[j][d] = state.mean[d] + std::sqrt(state.variance[d]) * static_cast<float>(rng.normal());

  // Gradient-trained members share the critics: each starts from the critics the
  // previous member left behind.
  for (std::size_t j = 0; j < static_cast<std::size_t>(state.trained_members); ++j) {
    td3::AgentParams member = state.core;
    member.actor.assign_flat(thetas[j]);
    member.actor_opt = net::adam_init(member.actor);
    Rng member_rng(rng.next());
    td3::td3_update_round(member, workspace.buffer(), config.hyper, member_rng);
    thetas[j] = member.actor.flatten();
    state.core.critic1 = std::move(member.critic1);
    state.core.critic2 = std::move(member.critic2);
    state.core.target_critic1 = std::move(member.target_critic1);
    state.core.target_critic2 = std::move(member.target_critic2);
    state.core.target_actor = std::move(member.target_actor);
    state.core.critic1_opt = std::move(member.critic1_opt);
    state.core.critic2_opt = std::move(member.critic2_opt);
    state.core.update_counter = member.update_counter;
    state.core.actor_updates = member.actor_updates;
  }

  const std::int64_t inserted_before = workspace.buffer().total_appended();
  const std::int64_t first_id = workspace.reserve_episodes(static_cast<std::int64_t>(n));
  std::vector<Episode> episodes(n);
  parallel_for(n, workspace.threads(), [&](std::size_t j) {
    td3::AgentParams member = state.core;
    member.actor.assign_flat(thetas[j]);
    Rng unused(0);
    auto env = workspace.env().clone();
    const std::int64_t id = first_id + static_cast<std::int64_t>(j);
    episodes[j] = run_episode(&member, *env, workspace.episode_seed(id), 0.0, unused, id);
  });

  RoundMetrics metrics;
  std::vector<FitnessRecord> records(n);
  for (std::size_t j = 0; j < n; ++j) {
    workspace.commit(episodes[j]);
    metrics.env_steps += static_cast<std::int64_t>(episodes[j].transitions.size());
    records[j].agent_index = static_cast<int>(j);
    records[j].fitness = apply_probe(config.probe, Eta{{}, static_cast<int>(j)}, episodes[j].episode_return);
    metrics.fitness.push_back(records[j].fitness);
  }
  metrics.episodes = static_cast<int>(n);

  const std::vector<std::size_t> elites = elite_indices(records);
  const double k = static_cast<double>(elites.size());
  for (std::size_t d = 0; d < dims; ++d) {
    double mu = 0.0;
    for (std::size_t e : elites) mu += thetas[e][d];
    mu /= k;
    double var = 0.0;
    for (std::size_t e : elites) var += (thetas[e][d] - mu) * (thetas[e][d] - mu);
    state.mean[d] = static_cast<float>(mu);
    state.variance[d] = static_cast<float>(var / k + state.variance_floor);
  }
  state.core.actor.assign_flat(state.mean);
  metrics.buffer_insertions = workspace.buffer().total_appended() - inserted_before;
  summarize(metrics);
  return metrics;
}

}  // namespace ohtes::tuners
