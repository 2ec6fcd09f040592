#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "ohtes/rng.hpp"

namespace ohtes::envs {

struct EnvSpec {
  std::string name;
  int obs_dim = 0;
  int act_dim = 0;
  std::vector<double> action_low;
  std::vector<double> action_high;
  int episode_len = 1;
  double dt = 0.0;
};

struct StepResult {
  std::vector<double> obs;
  double reward = 0.0;
  bool done = false;      // episode over (time limit or terminal)
  bool terminal = false;  // physical terminal; time-limit truncation leaves this false
};

/// Episodic continuous-control environment. Instances are single-owner; use
/// clone() to give each worker its own copy.
class Env {
 public:
  virtual ~Env() = default;

  virtual const EnvSpec& spec() const = 0;
  virtual std::vector<double> reset(std::uint64_t seed) = 0;
  // Throws std::logic_error when called after done without reset.
  virtual StepResult step(std::span<const double> action) = 0;
  virtual std::unique_ptr<Env> clone() const = 0;

  virtual int step_count() const = 0;
  // Number of steps whose action had at least one component outside the box.
  virtual std::int64_t clip_count() const = 0;
};

/// Shared bookkeeping for the built-in tasks: action clipping, the time limit and
/// the step-after-done guard. Subclasses implement the dynamics.
class BuiltinEnv : public Env {
 public:
  explicit BuiltinEnv(EnvSpec spec) : spec_(std::move(spec)) {}

  const EnvSpec& spec() const override { return spec_; }
  std::vector<double> reset(std::uint64_t seed) final;
  StepResult step(std::span<const double> action) final;
  int step_count() const override { return step_count_; }
  std::int64_t clip_count() const override { return clip_count_; }

 protected:
  virtual void reset_state(Rng& rng) = 0;
  // Advances one dt with an in-bounds action and returns the reward.
  virtual double advance(std::span<const double> action) = 0;
  virtual std::vector<double> observe() const = 0;

 private:
  EnvSpec spec_;
  int step_count_ = 0;
  std::int64_t clip_count_ = 0;
  bool done_ = true;
};

/// Pendulum swing-up. theta = 0 is upright; theta'' = 3g/(2l) sin(theta) + 3/(m l^2) u,
/// semi-implicit Euler with dt = 0.05, |theta'| <= 8, |u| <= 2. Observation
/// (cos theta, sin theta, theta'); reward -(wrap(theta)^2 + 0.1 theta'^2 + 0.001 u^2)
/// evaluated at the pre-step state. Resets draw theta ~ U(-pi, pi), theta' ~ U(-1, 1).
class Pendulum final : public BuiltinEnv {
 public:
  static constexpr double kGravity = 10.0;
  static constexpr double kMass = 1.0;
  static constexpr double kLength = 1.0;
  static constexpr double kMaxSpeed = 8.0;
  static constexpr double kMaxTorque = 2.0;

  Pendulum();
  std::unique_ptr<Env> clone() const override { return std::make_unique<Pendulum>(*this); }

  // Test hook: overwrite the physical state (step counter unchanged).
  void set_state(double theta, double theta_dot) {
    theta_ = theta;
    theta_dot_ = theta_dot;
  }
  double theta() const { return theta_; }
  double theta_dot() const { return theta_dot_; }

 protected:
  void reset_state(Rng& rng) override;
  double advance(std::span<const double> action) override;
  std::vector<double> observe() const override;

 private:
  double theta_ = 0.0;
  double theta_dot_ = 0.0;
};

/// Planar double integrator reaching a random goal. Acceleration actions in
/// [-1, 1]^2, dt = 0.05, velocity clamped to [-2, 2]^2, position clamped to
/// [-1, 1]^2 (velocity zeroed against a wall). Starts at rest in [-0.5, 0.5]^2 with
/// the goal in [-0.9, 0.9]^2. Observation (pos, vel, goal); reward -||pos' - goal||.
class PointMass final : public BuiltinEnv {
 public:
  static constexpr double kStartBox = 0.5;
  static constexpr double kGoalBox = 0.9;
  static constexpr double kMaxSpeed = 2.0;

  PointMass();
  std::unique_ptr<Env> clone() const override { return std::make_unique<PointMass>(*this); }

  void set_state(std::span<const double, 2> pos, std::span<const double, 2> vel,
                 std::span<const double, 2> goal);
  const double* position() const { return pos_; }

 protected:
  void reset_state(Rng& rng) override;
  double advance(std::span<const double> action) override;
  std::vector<double> observe() const override;

 private:
  double pos_[2] = {0.0, 0.0};
  double vel_[2] = {0.0, 0.0};
  double goal_[2] = {0.0, 0.0};
};

/// Emits the sum of the last d rewards every d-th step (1-indexed) and zero
/// otherwise. Any remainder is flushed on the step that ends the episode, so
/// episode returns are unchanged.
class DelayedReward final : public Env {
 public:
  DelayedReward(std::unique_ptr<Env> inner, int delay);
  DelayedReward(const DelayedReward& other);

  const EnvSpec& spec() const override { return inner_->spec(); }
  std::vector<double> reset(std::uint64_t seed) override;
  StepResult step(std::span<const double> action) override;
  std::unique_ptr<Env> clone() const override { return std::make_unique<DelayedReward>(*this); }
  int step_count() const override { return inner_->step_count(); }
  std::int64_t clip_count() const override { return inner_->clip_count(); }

  int delay() const { return delay_; }
  Env& inner() { return *inner_; }

 private:
  std::unique_ptr<Env> inner_;
  int delay_;
  int t_ = 0;
  double pending_ = 0.0;
};

/// Builds `pendulum` or `pointmass`; delay > 1 wraps in DelayedReward.
/// Unknown names and delay < 1 throw std::invalid_argument.
std::unique_ptr<Env> make_env(const std::string& name, int delay = 1);

bool is_known_env(const std::string& name);

}  // namespace ohtes::envs
