#include "ohtes/td3.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "ohtes/errors.hpp"

namespace ohtes::td3 {

void Td3Hyper::validate() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument("td3: " + what); };
  if (!(lr_actor >= 0.0) || !std::isfinite(lr_actor)) fail("lr_actor must be >= 0");
  if (!(lr_critic >= 0.0) || !std::isfinite(lr_critic)) fail("lr_critic must be >= 0");
  if (n_step < 1) fail("n_step must be >= 1");
  if (!(gamma > 0.0 && gamma < 1.0)) fail("gamma must lie in (0, 1)");
  if (!(polyak > 0.0 && polyak <= 1.0)) fail("polyak must lie in (0, 1]");
  if (policy_delay < 1) fail("policy_delay must be >= 1");
  if (!(target_noise_std >= 0.0)) fail("target_noise_std must be >= 0");
  if (!(target_noise_clip >= 0.0)) fail("target_noise_clip must be >= 0");
  if (!(exploration_noise_std >= 0.0)) fail("exploration_noise_std must be >= 0");
  if (batch_size < 1) fail("batch_size must be >= 1");
  if (grad_steps_per_round < 0) fail("grad_steps_per_round must be >= 0");
}

AgentParams make_agent(const envs::EnvSpec& spec, std::span<const int> hidden, std::uint64_t seed) {
  const double bound = spec.action_high.at(0);
  for (int i = 0; i < spec.act_dim; ++i)
    if (spec.action_high[i] != bound || spec.action_low[i] != -bound)
      throw std::invalid_argument("make_agent: action box must be symmetric with a common bound");

  std::vector<int> actor_sizes{spec.obs_dim};
  actor_sizes.insert(actor_sizes.end(), hidden.begin(), hidden.end());
  actor_sizes.push_back(spec.act_dim);
  std::vector<int> critic_sizes{spec.obs_dim + spec.act_dim};
  critic_sizes.insert(critic_sizes.end(), hidden.begin(), hidden.end());
  critic_sizes.push_back(1);

  AgentParams agent;
  agent.actor = net::mlp_init<float>(actor_sizes, net::OutputActivation::kTanh, static_cast<float>(bound),
                                     derive_seed(seed, "actor"));
  agent.critic1 = net::mlp_init<float>(critic_sizes, net::OutputActivation::kIdentity, 1.0f,
                                       derive_seed(seed, "critic1"));
  agent.critic2 = net::mlp_init<float>(critic_sizes, net::OutputActivation::kIdentity, 1.0f,
                                       derive_seed(seed, "critic2"));
  agent.target_actor = agent.actor;
  agent.target_critic1 = agent.critic1;
  agent.target_critic2 = agent.critic2;
  agent.actor_opt = net::adam_init(agent.actor);
  agent.critic1_opt = net::adam_init(agent.critic1);
  agent.critic2_opt = net::adam_init(agent.critic2);
  return agent;
}

MatrixF critic_input(const MatrixF& obs, const MatrixF& act) {
  if (obs.rows() != act.rows()) throw std::invalid_argument("critic_input: batch size mismatch");
  MatrixF x(obs.rows(), obs.cols() + act.cols());
  x.leftCols(obs.cols()) = obs;
  x.rightCols(act.cols()) = act;
  return x;
}

MatrixF target_policy_actions(const AgentParams& agent, const MatrixF& obs_n, const Td3Hyper& h, Rng& rng) {
  MatrixF act = net::mlp_forward(agent.target_actor, obs_n);
  const float bound = agent.action_bound();
  const double clip = h.target_noise_clip * bound;
  const double std = h.target_noise_std * bound;
  for (Eigen::Index r = 0; r < act.rows(); ++r) {
    for (Eigen::Index c = 0; c < act.cols(); ++c) {
      double noise = 0.0;
      if (std > 0.0) noise = std::clamp(rng.normal() * std, -clip, clip);
      act(r, c) = std::clamp(static_cast<float>(act(r, c) + noise), -bound, bound);
    }
  }
  return act;
}

std::vector<double> compute_target(const AgentParams& agent, const replay::NStepBatch& batch, const Td3Hyper& h,
                                   Rng& rng) {
  if (batch.obs_n.cols() != agent.obs_dim()) throw std::invalid_argument("compute_target: observation width");
  const MatrixF act_n = target_policy_actions(agent, batch.obs_n, h, rng);
  const MatrixF x = critic_input(batch.obs_n, act_n);
  const MatrixF q1 = net::mlp_forward(agent.target_critic1, x);
  const MatrixF q2 = net::mlp_forward(agent.target_critic2, x);
  std::vector<double> y(batch.size());
  for (std::size_t k = 0; k < batch.size(); ++k) {
    const double q = std::min(static_cast<double>(q1(k, 0)), static_cast<double>(q2(k, 0)));
    y[k] = batch.bootstrap_weight[k] == 0.0 ? batch.ret_n[k] : batch.ret_n[k] + batch.bootstrap_weight[k] * q;
  }
  return y;
}

double critic_regression_step(Mlp& critic, net::AdamState<float>& opt, const MatrixF& inputs,
                              std::span<const double> targets, double lr) {
  net::ForwardCache<float> cache;
  const MatrixF q = net::mlp_forward(critic, inputs, &cache);
  const auto batch = static_cast<double>(q.rows());
  double loss = 0.0;
  MatrixF upstream(q.rows(), 1);
  for (Eigen::Index k = 0; k < q.rows(); ++k) {
    const double err = static_cast<double>(q(k, 0)) - targets[k];
    loss += err * err;
    upstream(k, 0) = static_cast<float>(2.0 * err / batch);
  }
  loss /= batch;
  if (!std::isfinite(loss)) throw NumericError("critic update: non-finite loss");
  const auto grads = net::mlp_backward(critic, cache, upstream);
  net::adam_step(critic, grads, opt, lr);
  return loss;
}

double critic_update(AgentParams& agent, const replay::NStepBatch& batch, const Td3Hyper& h, Rng& rng) {
  const std::vector<double> y = compute_target(agent, batch, h, rng);
  const MatrixF x = critic_input(batch.obs0, batch.act0);
  const double l1 = critic_regression_step(agent.critic1, agent.critic1_opt, x, y, h.lr_critic);
  const double l2 = critic_regression_step(agent.critic2, agent.critic2_opt, x, y, h.lr_critic);
  ++agent.update_counter;
  return l1 + l2;
}

net::MlpGradients<float> actor_ascent_gradients(const Mlp& actor, const MatrixF& obs, const MatrixF& dq_da) {
  net::ForwardCache<float> cache;
  net::mlp_forward(actor, obs, &cache);
  // Adam descends, so feed the negated ascent direction.
  const MatrixF upstream = -dq_da;
  return net::mlp_backward(actor, cache, upstream);
}

double actor_update(AgentParams& agent, const MatrixF& obs, const Td3Hyper& h) {
  const MatrixF act = net::mlp_forward(agent.actor, obs);
  net::ForwardCache<float> critic_cache;
  const MatrixF q = net::mlp_forward(agent.critic1, critic_input(obs, act), &critic_cache);
  const auto batch = static_cast<double>(obs.rows());
  double objective = 0.0;
  for (Eigen::Index k = 0; k < q.rows(); ++k) objective += q(k, 0);
  objective /= batch;
  if (!std::isfinite(objective)) throw NumericError("actor update: non-finite objective");

  const MatrixF upstream = MatrixF::Constant(q.rows(), 1, static_cast<float>(1.0 / batch));
  const auto critic_grads = net::mlp_backward(agent.critic1, critic_cache, upstream, net::GradientScope::kInputOnly);
  const MatrixF dq_da = critic_grads.input.rightCols(agent.act_dim());
  const auto actor_grads = actor_ascent_gradients(agent.actor, obs, dq_da);
  net::adam_step(agent.actor, actor_grads, agent.actor_opt, h.lr_actor);

  net::polyak_update(agent.target_actor, agent.actor, h.polyak);
  net::polyak_update(agent.target_critic1, agent.critic1, h.polyak);
  net::polyak_update(agent.target_critic2, agent.critic2, h.polyak);
  ++agent.actor_updates;
  return objective;
}

void td3_update_round(AgentParams& agent, const replay::ReplayBuffer& buffer, const Td3Hyper& h, Rng& rng,
                      const RoundHooks* hooks) {
  h.validate();
  for (int step = 0; step < h.grad_steps_per_round; ++step) {
    const replay::NStepBatch batch = buffer.sample_nstep(h.batch_size, h.n_step, h.gamma, rng);
    critic_update(agent, batch, h, rng);
    if (hooks != nullptr && hooks->after_critic_step) hooks->after_critic_step(batch);
    if (agent.update_counter % h.policy_delay == 0) {
      if (hooks != nullptr && hooks->after_actor_step) {
        const Mlp before = agent.actor;
        actor_update(agent, batch.obs0, h);
        hooks->after_actor_step(before, batch.obs0);
      } else {
        actor_update(agent, batch.obs0, h);
      }
    }
  }
}

std::vector<double> select_action(const AgentParams& agent, std::span<const double> obs, double noise_std,
                                  Rng& rng) {
  if (static_cast<int>(obs.size()) != agent.obs_dim()) throw std::invalid_argument("select_action: obs dimension");
  std::vector<float> x(obs.begin(), obs.end());
  const std::vector<float> mean = net::mlp_forward<float>(agent.actor, x);
  const double bound = agent.action_bound();
  std::vector<double> action(mean.size());
  for (std::size_t i = 0; i < mean.size(); ++i) {
    double a = mean[i];
    if (noise_std > 0.0) a += noise_std * bound * rng.normal();
    action[i] = std::clamp(a, -bound, bound);
  }
  return action;
}

}  // namespace ohtes::td3
