#include "ohtes/replay.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "ohtes/errors.hpp"

namespace ohtes::replay {

ReplayBuffer::ReplayBuffer(std::size_t capacity, int obs_dim, int act_dim)
    : capacity_(capacity), obs_dim_(obs_dim), act_dim_(act_dim) {
  if (capacity == 0 || obs_dim <= 0 || act_dim <= 0)
    throw std::invalid_argument("ReplayBuffer: capacity and dimensions must be positive");
  obs_.resize(capacity * obs_dim);
  next_obs_.resize(capacity * obs_dim);
  act_.resize(capacity * act_dim);
  reward_.resize(capacity);
  terminal_.resize(capacity);
  episode_.resize(capacity);
  step_.resize(capacity);
  next_slot_.assign(capacity, kNoLink);
}

void ReplayBuffer::append(const Transition& t) {
  std::lock_guard lock(mutex_);
  append_locked(t);
}

void ReplayBuffer::append(std::span<const Transition> ts) {
  std::lock_guard lock(mutex_);
  for (const auto& t : ts) append_locked(t);
}

void ReplayBuffer::append_locked(const Transition& t) {
  if (static_cast<int>(t.obs.size()) != obs_dim_ || static_cast<int>(t.next_obs.size()) != obs_dim_ ||
      static_cast<int>(t.action.size()) != act_dim_)
    throw std::invalid_argument("ReplayBuffer::append: transition dimensions do not match the buffer");
  if (!std::isfinite(t.reward)) throw std::invalid_argument("ReplayBuffer::append: non-finite reward");

  const std::size_t slot = head_;
  if (size_ == capacity_) {
    // Evicting: forget the episode tail pointer if it still points here.
    auto it = last_slot_of_episode_.find(episode_[slot]);
    if (it != last_slot_of_episode_.end() && it->second == slot) last_slot_of_episode_.erase(it);
  }

  std::copy(t.obs.begin(), t.obs.end(), obs_.begin() + slot * obs_dim_);
  std::copy(t.next_obs.begin(), t.next_obs.end(), next_obs_.begin() + slot * obs_dim_);
  std::copy(t.action.begin(), t.action.end(), act_.begin() + slot * act_dim_);
  reward_[slot] = t.reward;
  terminal_[slot] = t.terminal ? 1 : 0;
  episode_[slot] = t.episode_id;
  step_[slot] = t.step_index;
  next_slot_[slot] = kNoLink;

  auto [it, inserted] = last_slot_of_episode_.try_emplace(t.episode_id, slot);
  if (!inserted) {
    const std::size_t prev = it->second;
    if (episode_[prev] == t.episode_id && step_[prev] + 1 == t.step_index) next_slot_[prev] = slot;
    it->second = slot;
  }

  head_ = (head_ + 1) % capacity_;
  size_ = std::min(size_ + 1, capacity_);
  ++total_;
}

bool ReplayBuffer::linked(std::size_t from, std::size_t to) const {
  if (to == kNoLink || to >= size_) return false;
  return episode_[to] == episode_[from] && step_[to] == step_[from] + 1;
}

NStepBatch ReplayBuffer::sample_nstep(std::size_t batch_size, int n, double gamma, Rng& rng) const {
  if (n < 1) throw std::invalid_argument("sample_nstep: n must be >= 1");
  if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("sample_nstep: gamma must lie in (0, 1)");
  std::lock_guard lock(mutex_);
  if (size_ == 0) throw Unavailable("sample_nstep: replay buffer is empty");

  NStepBatch batch;
  batch.obs0.resize(batch_size, obs_dim_);
  batch.act0.resize(batch_size, act_dim_);
  batch.obs_n.resize(batch_size, obs_dim_);
  batch.ret_n.resize(batch_size);
  batch.bootstrap_weight.resize(batch_size);
  batch.horizon.resize(batch_size);
  batch.start_slot.resize(batch_size);

  for (std::size_t k = 0; k < batch_size; ++k) {
    const std::size_t start = static_cast<std::size_t>(rng.below(size_));
    double ret = 0.0;
    double discount = 1.0;
    std::size_t slot = start;
    int m = 0;
    bool terminal = false;
    while (true) {
      ret += discount * reward_[slot];
      discount *= gamma;
      ++m;
      if (terminal_[slot]) {
        terminal = true;
        break;
      }
      if (m == n || !linked(slot, next_slot_[slot])) break;
      slot = next_slot_[slot];
    }
    for (int d = 0; d < obs_dim_; ++d) {
      batch.obs0(k, d) = obs_[start * obs_dim_ + d];
      batch.obs_n(k, d) = next_obs_[slot * obs_dim_ + d];
    }
    for (int d = 0; d < act_dim_; ++d) batch.act0(k, d) = act_[start * act_dim_ + d];
    batch.ret_n[k] = ret;
    batch.bootstrap_weight[k] = terminal ? 0.0 : discount;
    batch.horizon[k] = m;
    batch.start_slot[k] = start;
  }
  return batch;
}

std::size_t ReplayBuffer::size() const {
  std::lock_guard lock(mutex_);
  return size_;
}

std::int64_t ReplayBuffer::total_appended() const {
  std::lock_guard lock(mutex_);
  return total_;
}

Transition ReplayBuffer::at(std::size_t slot) const {
  std::lock_guard lock(mutex_);
  if (slot >= size_) throw std::out_of_range("ReplayBuffer::at: slot " + std::to_string(slot));
  Transition t;
  t.obs.assign(obs_.begin() + slot * obs_dim_, obs_.begin() + (slot + 1) * obs_dim_);
  t.next_obs.assign(next_obs_.begin() + slot * obs_dim_, next_obs_.begin() + (slot + 1) * obs_dim_);
  t.action.assign(act_.begin() + slot * act_dim_, act_.begin() + (slot + 1) * act_dim_);
  t.reward = reward_[slot];
  t.terminal = terminal_[slot] != 0;
  t.episode_id = episode_[slot];
  t.step_index = step_[slot];
  return t;
}

}  // namespace ohtes::replay
