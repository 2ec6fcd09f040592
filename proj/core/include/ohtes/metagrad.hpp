#pragma once

// Meta-gradient learning-rate adaptation for deterministic actor-critics.
//
// A separate meta-critic Q_meta is trained like the online critics on its own
// batches. After each actor step phi' = phi + alpha_pi * u, the meta objective
// J(alpha) = mean_x Q_meta(x, pi_{phi + alpha u}(x)) is differentiated along the
// realized update direction u (held fixed with respect to alpha):
//     dJ/dalpha_pi = mean_x grad_phi Q_meta(x, pi_phi'(x)) . u
// and alpha_pi ascends it through Adam with step size beta, then is clamped.

#include <array>
#include <cstdint>

#include "ohtes/net.hpp"
#include "ohtes/replay.hpp"
#include "ohtes/rng.hpp"
#include "ohtes/td3.hpp"

namespace ohtes::metagrad {

using net::MatrixF;
using net::Mlp;

struct MetaConfig {
  double beta = 1e-4;
  bool tune_critic_lr = false;
  double alpha_min = 1e-6;
  double alpha_max = 1e-1;
};

struct MetaState {
  Mlp q_meta;
  net::AdamState<float> q_meta_opt;
  std::array<double, 2> alpha{1e-3, 1e-3};  // (actor, critic)
  net::AdamState<double> alpha_opt;
  MetaConfig config;
  double last_delta_actor = 0.0;
  double last_delta_critic = 0.0;
};

/// Fresh meta-critic with the critic's shape, initialized from `seed`.
MetaState make_meta_state(const td3::AgentParams& agent, const MetaConfig& config, std::array<double, 2> alpha,
                          std::uint64_t seed);

/// One TD step of q_meta toward the agent's n-step target (target networks,
/// smoothed target actions) with learning rate h.lr_critic. Returns the pre-update
/// MSE; throws NumericError on a non-finite loss.
double meta_critic_update(MetaState& meta, const td3::AgentParams& agent, const replay::NStepBatch& batch,
                          const td3::Td3Hyper& h, Rng& rng);

/// mean over obs of Q_meta(x, actor(x)).
double meta_objective(const Mlp& q_meta, const Mlp& actor, const MatrixF& obs);

/// d/dalpha mean Q_meta(x, pi_{actor_before + alpha u}(x)) at alpha = alpha_pi, where
/// u = (actor_after - actor_before) / alpha_pi.
double actor_lr_meta_gradient(const Mlp& q_meta, const Mlp& actor_before, const Mlp& actor_after,
                              const MatrixF& obs, double alpha_pi);

/// Computes the meta-gradient for the step actor_before -> agent.actor, ascends
/// alpha with Adam (lr beta) and clamps it. Returns (d alpha_pi, d alpha_q).
///
/// d alpha_q is only computed when tune_critic_lr is set and critic1_before (the
/// critic at the previous actor step) is given: with u_q = (critic1 - critic1_before)
/// / alpha_q, it is a central difference in alpha_q of the meta objective after a
/// plain gradient actor step taken under critic1_before + alpha_q u_q.
std::array<double, 2> metagrad_alpha_update(MetaState& meta, const td3::AgentParams& agent,
                                            const Mlp& actor_before, const MatrixF& obs, const td3::Td3Hyper& h,
                                            const Mlp* critic1_before = nullptr);

/// One update round of the meta-gradient learner: a TD3 round at the current
/// alpha whose critic steps are mirrored on q_meta with independent batches
/// from `meta_rng`, and whose actor steps each trigger an alpha update. The
/// TD3 stream `rng` is consumed exactly as by td3_update_round.
void metagrad_round(td3::AgentParams& agent, MetaState& meta, const replay::ReplayBuffer& buffer,
                    const td3::Td3Hyper& base, Rng& rng, Rng& meta_rng);

}  // namespace ohtes::metagrad
