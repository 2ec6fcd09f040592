#pragma once

// Online hyper-parameter tuning with evolutionary strategies.
//
// Continuous hyper-parameters (log10 learning rates) follow a Gaussian N(mu, sigma^2)
// updated either by the ES gradient estimator
//     mu' = mu + beta / (sigma N) * sum_j F_j eps_j,   eps_j = (eta_j - mu) / sigma
// or by the cross-entropy method. Discrete hyper-parameters (the n-step horizon)
// follow softmax(logits) mixed with an epsilon-uniform floor, and the logits
// ascend the score-function estimate (1/N) sum_j F_j (onehot(eta_j) - softmax(L))
// through Adam. F_j is the standardized fitness unless raw mode is requested.

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "ohtes/net.hpp"
#include "ohtes/rng.hpp"
#include "ohtes/rollout.hpp"
#include "ohtes/td3.hpp"

namespace ohtes::tuners {

enum class GaussianMode { kEsGradient, kCem };

struct GaussianTunerState {
  std::vector<double> mean;   // over tuned dimensions (log10 learning rates)
  std::vector<double> sigma;  // per-dimension scale, > 0
  double beta = 0.1;          // ES step size (es-gradient mode only)
  int population = 10;
  GaussianMode mode = GaussianMode::kEsGradient;
  bool standardize = true;
  double variance_floor = 1e-4;  // cem mode

  void validate() const;
};

struct GaussianSample {
  std::vector<std::vector<double>> etas;    // mean + sigma * noise
  std::vector<std::vector<double>> noises;  // standard normal draws
};

struct FitnessRecord {
  std::vector<double> eta;  // continuous sample (empty for discrete)
  int index = -1;           // discrete sample (-1 for continuous)
  double fitness = 0.0;
  int agent_index = 0;
};

/// N i.i.d. draws from N(mean, sigma^2), dimension-major within each draw.
GaussianSample gaussian_sample(const GaussianTunerState& state, Rng& rng);

/// (f - mean(f)) / (std(f) + 1e-8) with the population standard deviation.
std::vector<double> standardize_fitness(std::span<const double> fitness);

/// mu update from the ES gradient estimator; sigma is left unchanged.
/// Throws NumericError on non-finite fitness.
void es_gradient_update(GaussianTunerState& state, std::span<const FitnessRecord> records);

/// Indices of the ceil(N/2) highest-fitness records; ties keep the earlier record.
std::vector<std::size_t> elite_indices(std::span<const FitnessRecord> records);

/// Cross-entropy update: mean and (population) variance of the elites, plus the
/// variance floor, per dimension.
void cem_update(GaussianTunerState& state, std::span<const FitnessRecord> records);

struct CategoricalTunerState {
  std::vector<double> logits;
  net::AdamState<double> adam;
  double epsilon = 0.1;
  int samples_per_update = 6;
  std::vector<int> support;  // the hyper-parameter value behind each index
  double beta = 0.02;
  bool standardize = true;

  std::size_t size() const { return logits.size(); }
  void validate() const;
};

CategoricalTunerState make_categorical(std::vector<int> support, double epsilon = 0.1, int samples_per_update = 6,
                                       double beta = 0.02);

std::vector<double> softmax(std::span<const double> logits);

/// Sampling distribution: (1 - epsilon) softmax(logits) + epsilon / K.
std::vector<double> sampling_probabilities(const CategoricalTunerState& state);

/// With probability epsilon uniform over K, otherwise from softmax(logits).
int categorical_sample(const CategoricalTunerState& state, Rng& rng);

/// (1/N) sum_j F_j (onehot(eta_j) - softmax(logits)); the ascent direction.
std::vector<double> score_function_direction(const CategoricalTunerState& state,
                                             std::span<const FitnessRecord> records);

/// Applies the score-function direction through Adam (lr beta), then recenters
/// the logits to mean zero.
void score_function_update(CategoricalTunerState& state, std::span<const FitnessRecord> records);

/// Mean undiscounted episode return; throws Unavailable for an empty list.
double fitness_estimate(std::span<const double> returns);

// ---------------------------------------------------------------------------
// Round orchestration over a population sharing one replay buffer.

/// A sampled hyper-parameter as seen by a fitness probe.
struct Eta {
  std::vector<double> values;  // continuous: log10 learning rates
  int index = -1;              // discrete: support index
};

/// Replaces the Monte-Carlo fitness of a member; used by synthetic test doubles.
/// Receives the sampled hyper-parameter and the member's episode return.
using FitnessProbe = std::function<double(const Eta&, double episode_return)>;

struct LearningRateBounds {
  double min = 1e-6;
  double max = 1e-1;
};

/// 10^log10_lr clamped to the bounds.
double learning_rate_from_log10(double log10_lr, LearningRateBounds bounds = {});

/// Maps eta (one or two log10 learning rates) onto a copy of `base`. One value
/// sets both learning rates; two values set (actor, critic).
td3::Td3Hyper with_learning_rates(const td3::Td3Hyper& base, std::span<const double> log10_lrs,
                                  LearningRateBounds bounds = {});

struct RoundMetrics {
  double fitness_mean = 0.0;
  int episodes = 0;
  std::int64_t env_steps = 0;
  std::int64_t buffer_insertions = 0;
  std::vector<double> fitness;
};

struct ContinuousRoundConfig {
  td3::Td3Hyper hyper;
  LearningRateBounds bounds;
  FitnessProbe probe;  // optional
};

/// One iteration of the continuous tuner: N clones of the main agent each train
/// one round with lr = 10^eta_j, then each collects one episode into the shared
/// buffer (appended in clone order); the distribution is updated from their
/// fitness; finally the main agent trains one round at the central rate 10^mu'
/// and collects one episode. Clones train in parallel on workspace.threads().
RoundMetrics oht_es_continuous_round(td3::AgentParams& main_agent, Rng& main_rng, GaussianTunerState& tuner,
                                     Workspace& workspace, const ContinuousRoundConfig& config, Rng& tuner_rng);

/// A persistent population member with its own sampling stream.
struct Member {
  td3::AgentParams agent;
  Rng rng;
};

struct DiscreteRoundConfig {
  td3::Td3Hyper hyper;  // n_step is overridden per agent from the support
  bool train_all_agents = true;
  FitnessProbe probe;  // optional
};

/// samples_per_update times: sample j, run one episode with agent j into the
/// shared buffer and record its fitness, then train (every agent, or only agent j)
/// one round with the agent's own n-step value. Ends with one score-function update.
RoundMetrics oht_es_discrete_round(std::vector<Member>& agents, CategoricalTunerState& tuner, Workspace& workspace,
                                   const DiscreteRoundConfig& config, Rng& tuner_rng);

/// CEM over actor parameter vectors with shared critics.
struct EsRlState {
  td3::AgentParams core;  // shared critics and targets; core.actor is the mean actor
  std::vector<float> mean;
  std::vector<float> variance;
  int population = 10;
  int trained_members = 5;
  double variance_floor = 1e-5;
};

EsRlState make_es_rl(td3::AgentParams core, double initial_variance = 1e-3, int population = 10,
                     int trained_members = 5, double variance_floor = 1e-5);

struct EsRlConfig {
  td3::Td3Hyper hyper;
  FitnessProbe probe;  // optional
};

/// Samples N actors around the mean, runs TD3 rounds for the first k of them
/// (critics carried from member to member), evaluates every actor for one episode
/// (noise-free, appended to the shared buffer), then refits mean/variance on the
/// elite half. core.actor is set to the new mean.
RoundMetrics es_rl_round(EsRlState& state, Workspace& workspace, const EsRlConfig& config, Rng& rng);

}  // namespace ohtes::tuners
