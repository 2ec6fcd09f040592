#pragma once

// Small deterministic environments for driving the wrappers and tuners.

#include <memory>
#include <stdexcept>
#include <vector>

#include "ohtes/envs.hpp"

namespace doubles {

using ohtes::envs::Env;
using ohtes::envs::EnvSpec;
using ohtes::envs::StepResult;

// Emits a fixed reward sequence; the episode ends after the last reward.
class ScriptedEnv final : public Env {
 public:
  explicit ScriptedEnv(std::vector<double> rewards, bool terminal_at_end = false)
      : rewards_(std::move(rewards)), terminal_at_end_(terminal_at_end) {
    spec_ = EnvSpec{"scripted", 1, 1, {-1.0}, {1.0}, static_cast<int>(rewards_.size()), 1.0};
  }
  const EnvSpec& spec() const override { return spec_; }
  std::vector<double> reset(std::uint64_t) override {
    t_ = 0;
    return {0.0};
  }
  StepResult step(std::span<const double>) override {
    if (t_ >= static_cast<int>(rewards_.size())) throw std::logic_error("scripted: done");
    StepResult r;
    r.reward = rewards_[static_cast<std::size_t>(t_)];
    ++t_;
    r.obs = {static_cast<double>(t_)};
    r.done = t_ == static_cast<int>(rewards_.size());
    r.terminal = r.done && terminal_at_end_;
    return r;
  }
  std::unique_ptr<Env> clone() const override { return std::make_unique<ScriptedEnv>(*this); }
  int step_count() const override { return t_; }
  std::int64_t clip_count() const override { return 0; }

 private:
  EnvSpec spec_;
  std::vector<double> rewards_;
  bool terminal_at_end_;
  int t_ = 0;
};

// Fixed-length episodes with unit reward and a one-dimensional action in [-1, 1].
class ShortEnv final : public Env {
 public:
  explicit ShortEnv(int len) { spec_ = EnvSpec{"short", 1, 1, {-1.0}, {1.0}, len, 1.0}; }
  const EnvSpec& spec() const override { return spec_; }
  std::vector<double> reset(std::uint64_t seed) override {
    t_ = 0;
    return {static_cast<double>(seed % 7)};
  }
  StepResult step(std::span<const double>) override {
    ++t_;
    StepResult r;
    r.obs = {static_cast<double>(t_)};
    r.reward = 1.0;
    r.done = t_ == spec_.episode_len;
    return r;
  }
  std::unique_ptr<Env> clone() const override { return std::make_unique<ShortEnv>(*this); }
  int step_count() const override { return t_; }
  std::int64_t clip_count() const override { return 0; }

 private:
  EnvSpec spec_;
  int t_ = 0;
};

}  // namespace doubles
