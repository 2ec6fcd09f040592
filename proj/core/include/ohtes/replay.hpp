#pragma once

#include <cstdint>
#include <mutex>
#include <span>
#include <unordered_map>
#include <vector>

#include "ohtes/net.hpp"
#include "ohtes/rng.hpp"

namespace ohtes::replay {

struct Transition {
  std::vector<float> obs;
  std::vector<float> action;
  double reward = 0.0;
  std::vector<float> next_obs;
  bool terminal = false;  // physical terminal only; time limits are not terminal
  std::int64_t episode_id = 0;
  std::int64_t step_index = 0;
};

/// Uncorrected n-step samples. For sample k with horizon m = horizon[k]:
/// ret_n = sum_{i<m} gamma^i r_i, obs_n is the observation after the m-th step, and
/// bootstrap_weight is gamma^m, or 0 when the m-th transition is terminal.
struct NStepBatch {
  net::MatrixF obs0;
  net::MatrixF act0;
  net::MatrixF obs_n;
  std::vector<double> ret_n;
  std::vector<double> bootstrap_weight;
  std::vector<int> horizon;
  std::vector<std::size_t> start_slot;

  std::size_t size() const { return ret_n.size(); }
};

/// Fixed-capacity FIFO replay memory shared by every population member. Appends
/// and samples are serialized behind one mutex.
///
/// Each slot keeps a link to the slot holding the next step of the same episode,
/// so episodes may be appended interleaved. A link is only followed while the
/// linked slot still holds (episode_id, step_index + 1); eviction breaks it.
class ReplayBuffer {
 public:
  ReplayBuffer(std::size_t capacity, int obs_dim, int act_dim);

  ReplayBuffer(const ReplayBuffer&) = delete;
  ReplayBuffer& operator=(const ReplayBuffer&) = delete;

  void append(const Transition& t);
  void append(std::span<const Transition> ts);

  /// Uniform start slots; each sample accumulates up to n rewards inside its
  /// episode, stopping early at a terminal (weight 0) or at the last stored step
  /// of the episode (weight gamma^m, m < n). Throws Unavailable on an empty buffer.
  NStepBatch sample_nstep(std::size_t batch_size, int n, double gamma, Rng& rng) const;

  std::size_t size() const;
  std::size_t capacity() const { return capacity_; }
  std::int64_t total_appended() const;
  int obs_dim() const { return obs_dim_; }
  int act_dim() const { return act_dim_; }

  /// Copy of the transition stored in `slot` (slot < size()).
  Transition at(std::size_t slot) const;

 private:
  static constexpr std::size_t kNoLink = static_cast<std::size_t>(-1);

  void append_locked(const Transition& t);
  bool linked(std::size_t from, std::size_t to) const;

  std::size_t capacity_;
  int obs_dim_;
  int act_dim_;

  mutable std::mutex mutex_;
  std::size_t size_ = 0;
  std::size_t head_ = 0;  // next slot to write
  std::int64_t total_ = 0;

  std::vector<float> obs_;
  std::vector<float> act_;
  std::vector<float> next_obs_;
  std::vector<double> reward_;
  std::vector<std::uint8_t> terminal_;
  std::vector<std::int64_t> episode_;
  std::vector<std::int64_t> step_;
  std::vector<std::size_t> next_slot_;
  std::unordered_map<std::int64_t, std::size_t> last_slot_of_episode_;
};

}  // namespace ohtes::replay
