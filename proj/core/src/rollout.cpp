#include "ohtes/rollout.hpp"

namespace ohtes {

Episode run_episode(const td3::AgentParams* agent, envs::Env& env, std::uint64_t env_seed, double noise_std,
                    Rng& rng, std::int64_t episode_id) {
  const envs::EnvSpec& spec = env.spec();
  Episode episode;
  episode.id = episode_id;
  episode.transitions.reserve(spec.episode_len);
  std::vector<double> obs = env.reset(env_seed);
  for (std::int64_t t = 0;; ++t) {
    std::vector<double> action;
    if (agent != nullptr) {
      action = td3::select_action(*agent, obs, noise_std, rng);
    } else {
      action.resize(spec.act_dim);
      for (int i = 0; i < spec.act_dim; ++i) action[i] = rng.uniform(spec.action_low[i], spec.action_high[i]);
    }
    envs::StepResult step = env.step(action);
    replay::Transition tr;
    tr.obs.assign(obs.begin(), obs.end());
    tr.action.assign(action.begin(), action.end());
    tr.reward = step.reward;
    tr.next_obs.assign(step.obs.begin(), step.obs.end());
    tr.terminal = step.terminal;
    tr.episode_id = episode_id;
    tr.step_index = t;
    episode.transitions.push_back(std::move(tr));
    episode.episode_return += step.reward;
    obs = std::move(step.obs);
    if (step.done) break;
  }
  return episode;
}

void Workspace::commit(const Episode& episode) {
  buffer_.append(episode.transitions);
  env_steps_ += static_cast<std::int64_t>(episode.transitions.size());
}

Episode Workspace::collect(const td3::AgentParams* agent, double noise_std, Rng& rng) {
  const std::int64_t id = reserve_episodes(1);
  auto env = env_.clone();
  Episode episode = run_episode(agent, *env, episode_seed(id), noise_std, rng, id);
  commit(episode);
  return episode;
}

}  // namespace ohtes
