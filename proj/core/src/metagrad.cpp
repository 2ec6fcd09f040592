#include "ohtes/metagrad.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>

#include "ohtes/errors.hpp"

namespace ohtes::metagrad {

MetaState make_meta_state(const td3::AgentParams& agent, const MetaConfig& config, std::array<double, 2> alpha,
                          std::uint64_t seed) {
  if (!(config.alpha_min > 0.0 && config.alpha_min < config.alpha_max))
    throw std::invalid_argument("make_meta_state: need 0 < alpha_min < alpha_max");
  if (!(config.beta >= 0.0)) throw std::invalid_argument("make_meta_state: beta must be >= 0");
  MetaState meta;
  meta.q_meta = net::mlp_init<float>(agent.critic1.layer_sizes, net::OutputActivation::kIdentity, 1.0f, seed);
  meta.q_meta_opt = net::adam_init(meta.q_meta);
  meta.config = config;
  for (std::size_t i = 0; i < 2; ++i) meta.alpha[i] = std::clamp(alpha[i], config.alpha_min, config.alpha_max);
  meta.alpha_opt = net::adam_init<double>(2);
  return meta;
}

double meta_critic_update(MetaState& meta, const td3::AgentParams& agent, const replay::NStepBatch& batch,
                          const td3::Td3Hyper& h, Rng& rng) {
  if (!meta.q_meta.same_shape(agent.critic1)) throw std::invalid_argument("meta_critic_update: q_meta shape");
  const std::vector<double> y = td3::compute_target(agent, batch, h, rng);
  const MatrixF x = td3::critic_input(batch.obs0, batch.act0);
  return td3::critic_regression_step(meta.q_meta, meta.q_meta_opt, x, y, h.lr_critic);
}

double meta_objective(const Mlp& q_meta, const Mlp& actor, const MatrixF& obs) {
  const MatrixF act = net::mlp_forward(actor, obs);
  const MatrixF q = net::mlp_forward(q_meta, td3::critic_input(obs, act));
  double total = 0.0;
  for (Eigen::Index k = 0; k < q.rows(); ++k) total += q(k, 0);
  return total / static_cast<double>(q.rows());
}

namespace {

// grad_phi mean_x Q(x, pi_phi(x)) as a flat vector.
std::vector<float> objective_gradient(const Mlp& critic, const Mlp& actor, const MatrixF& obs) {
  net::ForwardCache<float> actor_cache;
  const MatrixF act = net::mlp_forward(actor, obs, &actor_cache);
  net::ForwardCache<float> critic_cache;
  const MatrixF q = net::mlp_forward(critic, td3::critic_input(obs, act), &critic_cache);
  const MatrixF upstream = MatrixF::Constant(q.rows(), 1, 1.0f / static_cast<float>(q.rows()));
  const auto cg = net::mlp_backward(critic, critic_cache, upstream, net::GradientScope::kInputOnly);
  const MatrixF dq_da = cg.input.rightCols(actor.output_dim());
  return net::mlp_backward(actor, actor_cache, dq_da).flatten();
}

}  // namespace

double actor_lr_meta_gradient(const Mlp& q_meta, const Mlp& actor_before, const Mlp& actor_after,
                              const MatrixF& obs, double alpha_pi) {
  if (!(alpha_pi > 0.0)) throw std::invalid_argument("actor_lr_meta_gradient: alpha_pi must be > 0");
  if (!actor_before.same_shape(actor_after)) throw std::invalid_argument("actor_lr_meta_gradient: shape mismatch");
  const std::vector<float> before = actor_before.flatten();
  const std::vector<float> after = actor_after.flatten();
  const std::vector<float> grad = objective_gradient(q_meta, actor_after, obs);
  double delta = 0.0;
  for (std::size_t i = 0; i < grad.size(); ++i) {
    const double u = (static_cast<double>(after[i]) - static_cast<double>(before[i])) / alpha_pi;
    delta += static_cast<double>(grad[i]) * u;
  }
  if (!std::isfinite(delta)) throw NumericError("actor_lr_meta_gradient: non-finite meta-gradient");
  return delta;
}

namespace {

double critic_lr_meta_gradient(const MetaState& meta, const td3::AgentParams& agent, const Mlp& actor_before,
                               const Mlp& critic1_before, const MatrixF& obs) {
  const double alpha_pi = meta.alpha[0];
  const double alpha_q = meta.alpha[1];
  const std::vector<float> c0 = critic1_before.flatten();
  const std::vector<float> c1 = agent.critic1.flatten();
  const std::vector<float> phi = actor_before.flatten();
  auto objective_at = [&](double aq) {
    std::vector<float> c(c0.size());
    for (std::size_t i = 0; i < c.size(); ++i)
      c[i] = static_cast<float>(c0[i] + aq * ((static_cast<double>(c1[i]) - c0[i]) / alpha_q));
    Mlp critic = critic1_before;
    critic.assign_flat(c);
    const std::vector<float> g = objective_gradient(critic, actor_before, obs);
    std::vector<float> stepped(phi.size());
    for (std::size_t i = 0; i < phi.size(); ++i) stepped[i] = static_cast<float>(phi[i] + alpha_pi * g[i]);
    Mlp actor = actor_before;
    actor.assign_flat(stepped);
    return meta_objective(meta.q_meta, actor, obs);
  };
  const double h = 1e-2 * alpha_q;
  return (objective_at(alpha_q + h) - objective_at(alpha_q - h)) / (2.0 * h);
}

}  // namespace

std::array<double, 2> metagrad_alpha_update(MetaState& meta, const td3::AgentParams& agent,
                                            const Mlp& actor_before, const MatrixF& obs, const td3::Td3Hyper& h,
                                            const Mlp* critic1_before) {
  std::array<double, 2> delta{0.0, 0.0};
  delta[0] = actor_lr_meta_gradient(meta.q_meta, actor_before, agent.actor, obs, h.lr_actor);
  if (meta.config.tune_critic_lr && critic1_before != nullptr)
    delta[1] = critic_lr_meta_gradient(meta, agent, actor_before, *critic1_before, obs);
  const std::array<double, 2> descent{-delta[0], -delta[1]};
  net::adam_step<double>(meta.alpha, descent, meta.alpha_opt, meta.config.beta);
  for (double& a : meta.alpha) a = std::clamp(a, meta.config.alpha_min, meta.config.alpha_max);
  meta.last_delta_actor = delta[0];
  meta.last_delta_critic = delta[1];
  return delta;
}

void metagrad_round(td3::AgentParams& agent, MetaState& meta, const replay::ReplayBuffer& buffer,
                    const td3::Td3Hyper& base, Rng& rng, Rng& meta_rng) {
  // td3_update_round reads `h` on every step, so alpha changes made by the hooks
  // take effect on the next critic/actor step.
  td3::Td3Hyper h = base;
  h.lr_actor = meta.alpha[0];
  h.lr_critic = meta.alpha[1];
  std::optional<Mlp> critic_at_last_actor_step;
  if (meta.config.tune_critic_lr) critic_at_last_actor_step = agent.critic1;

  td3::RoundHooks hooks;
  hooks.after_critic_step = [&](const replay::NStepBatch&) {
    const replay::NStepBatch meta_batch = buffer.sample_nstep(h.batch_size, h.n_step, h.gamma, meta_rng);
    meta_critic_update(meta, agent, meta_batch, h, meta_rng);
  };
  hooks.after_actor_step = [&](const Mlp& actor_before, const MatrixF& obs) {
    metagrad_alpha_update(meta, agent, actor_before, obs, h,
                          critic_at_last_actor_step ? &*critic_at_last_actor_step : nullptr);
    if (critic_at_last_actor_step) critic_at_last_actor_step = agent.critic1;
    h.lr_actor = meta.alpha[0];
    h.lr_critic = meta.alpha[1];
  };
  td3::td3_update_round(agent, buffer, h, rng, &hooks);
}

}  // namespace ohtes::metagrad
