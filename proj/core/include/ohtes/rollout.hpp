#pragma once

#include <cstdint>
#include <vector>

#include "ohtes/envs.hpp"
#include "ohtes/replay.hpp"
#include "ohtes/rng.hpp"
#include "ohtes/td3.hpp"

namespace ohtes {

struct Episode {
  std::vector<replay::Transition> transitions;
  double episode_return = 0.0;  // undiscounted sum of the rewards the agent received
  std::int64_t id = 0;
};

/// Runs one full episode. With agent == nullptr actions are uniform in the box.
/// The environment is reset with `env_seed`.
Episode run_episode(const td3::AgentParams* agent, envs::Env& env, std::uint64_t env_seed, double noise_std,
                    Rng& rng, std::int64_t episode_id);

/// Shared state of a training run: the replay buffer every member writes to,
/// the environment prototype, and the episode counter. Episode e always resets
/// with derive_seed(env_seed, e), so initial states depend only on the env stream.
class Workspace {
 public:
  Workspace(replay::ReplayBuffer& buffer, const envs::Env& env, std::uint64_t env_seed, int threads = 1)
      : buffer_(buffer), env_(env), env_seed_(env_seed), threads_(threads) {}

  replay::ReplayBuffer& buffer() { return buffer_; }
  const replay::ReplayBuffer& buffer() const { return buffer_; }
  const envs::Env& env() const { return env_; }
  int threads() const { return threads_; }
  std::int64_t env_steps() const { return env_steps_; }
  std::int64_t episodes() const { return next_episode_; }
  int episode_len() const { return env_.spec().episode_len; }

  /// Reserves `count` consecutive episode ids and returns the first.
  std::int64_t reserve_episodes(std::int64_t count) {
    const std::int64_t first = next_episode_;
    next_episode_ += count;
    return first;
  }
  std::uint64_t episode_seed(std::int64_t id) const { return derive_seed(env_seed_, static_cast<std::uint64_t>(id)); }

  /// Appends an episode's transitions to the shared buffer.
  void commit(const Episode& episode);

  /// Reserves an id, runs an episode on a private env copy and commits it.
  Episode collect(const td3::AgentParams* agent, double noise_std, Rng& rng);

 private:
  replay::ReplayBuffer& buffer_;
  const envs::Env& env_;
  std::uint64_t env_seed_;
  int threads_;
  std::int64_t next_episode_ = 0;
  std::int64_t env_steps_ = 0;
};

}  // namespace ohtes
