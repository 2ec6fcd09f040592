#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "ohtes/envs.hpp"
#include "ohtes/net.hpp"
#include "ohtes/replay.hpp"
#include "ohtes/rng.hpp"

namespace ohtes::td3 {

using net::MatrixF;
using net::Mlp;

/// Hyper-parameters of one TD3 update round. The learning rates and n_step are
/// the quantities the tuners adapt.
struct Td3Hyper {
  double lr_actor = 1e-3;
  double lr_critic = 1e-3;
  int n_step = 1;
  double gamma = 0.99;
  double polyak = 0.005;
  int policy_delay = 2;
  // Noise scales are fractions of the action bound.
  double target_noise_std = 0.2;
  double target_noise_clip = 0.5;
  double exploration_noise_std = 0.1;
  int batch_size = 100;
  int grad_steps_per_round = 200;

  // Throws std::invalid_argument naming the offending field.
  void validate() const;
};

struct AgentParams {
  Mlp actor;
  Mlp critic1;
  Mlp critic2;
  Mlp target_actor;
  Mlp target_critic1;
  Mlp target_critic2;
  net::AdamState<float> actor_opt;
  net::AdamState<float> critic1_opt;
  net::AdamState<float> critic2_opt;
  std::int64_t update_counter = 0;  // critic updates so far
  std::int64_t actor_updates = 0;

  int obs_dim() const { return actor.input_dim(); }
  int act_dim() const { return actor.output_dim(); }
  float action_bound() const { return actor.output_scale; }
};

/// Actor obs -> hidden... -> act (tanh scaled by the action bound) and twin
/// critics [obs, act] -> hidden... -> 1; targets start as copies. Requires a
/// symmetric action box with the same bound in every dimension.
AgentParams make_agent(const envs::EnvSpec& spec, std::span<const int> hidden, std::uint64_t seed);

/// Concatenates observations and actions column-wise into critic inputs.
MatrixF critic_input(const MatrixF& obs, const MatrixF& act);

/// Smoothed target-policy actions at obs_n. Noise is drawn row by row, one
/// rng.normal() per action dimension, scaled and clipped relative to the bound.
MatrixF target_policy_actions(const AgentParams& agent, const MatrixF& obs_n, const Td3Hyper& h, Rng& rng);

/// y = ret_n + w * min(Q'_1, Q'_2)(obs_n, target actions); target networks only.
std::vector<double> compute_target(const AgentParams& agent, const replay::NStepBatch& batch, const Td3Hyper& h,
                                   Rng& rng);

/// One Adam step on the mean squared error of a single critic against fixed
/// targets. Returns the pre-update MSE; throws NumericError on a non-finite loss.
double critic_regression_step(Mlp& critic, net::AdamState<float>& opt, const MatrixF& inputs,
                              std::span<const double> targets, double lr);

/// Updates both critics against the shared target. Returns the sum of the two
/// pre-update mean squared errors.
double critic_update(AgentParams& agent, const replay::NStepBatch& batch, const Td3Hyper& h, Rng& rng);

/// Actor parameter-gradient for ascent given dQ/da for each row of obs
/// (already divided by the batch size).
net::MlpGradients<float> actor_ascent_gradients(const Mlp& actor, const MatrixF& obs, const MatrixF& dq_da);

/// Ascends mean Q1(x, pi(x)) with one Adam step at lr_actor, then Polyak-updates
/// all three target networks. Returns the pre-update objective.
double actor_update(AgentParams& agent, const MatrixF& obs, const Td3Hyper& h);

/// Callbacks into an update round, used by the meta-gradient learner.
struct RoundHooks {
  std::function<void(const replay::NStepBatch&)> after_critic_step;
  std::function<void(const Mlp& actor_before, const MatrixF& obs)> after_actor_step;
};

/// grad_steps_per_round critic updates, with an actor update after every
/// policy_delay-th critic update (counted across rounds). This is one
/// application of the update function f(psi, D, eta).
void td3_update_round(AgentParams& agent, const replay::ReplayBuffer& buffer, const Td3Hyper& h, Rng& rng,
                      const RoundHooks* hooks = nullptr);

/// clip(pi(obs) + bound * N(0, noise_std^2), action box).
std::vector<double> select_action(const AgentParams& agent, std::span<const double> obs, double noise_std,
                                  Rng& rng);

}  // namespace ohtes::td3
