#include "ohtes/envs.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace ohtes::envs {

std::vector<double> BuiltinEnv::reset(std::uint64_t seed) {
  Rng rng(seed);
  reset_state(rng);
  step_count_ = 0;
  done_ = false;
  return observe();
}

StepResult BuiltinEnv::step(std::span<const double> action) {
  if (done_) throw std::logic_error(spec_.name + ": step() called on a finished episode; call reset()");
  if (static_cast<int>(action.size()) != spec_.act_dim)
    throw std::invalid_argument(spec_.name + ": action dimension mismatch");
  std::vector<double> clipped(action.begin(), action.end());
  bool clipped_any = false;
  for (int i = 0; i < spec_.act_dim; ++i) {
    const double c = std::clamp(clipped[i], spec_.action_low[i], spec_.action_high[i]);
    // NaN actions are not in the box either.
    if (c != clipped[i] || std::isnan(clipped[i])) {
      clipped_any = true;
      clipped[i] = std::isnan(clipped[i]) ? 0.0 : c;
    }
  }
  if (clipped_any) ++clip_count_;

  StepResult result;
  result.reward = advance(clipped);
  ++step_count_;
  result.obs = observe();
  result.done = step_count_ >= spec_.episode_len;
  result.terminal = false;
  done_ = result.done;
  return result;
}

namespace {

double wrap_angle(double theta) {
  constexpr double kPi = std::numbers::pi;
  double x = std::fmod(theta + kPi, 2.0 * kPi);
  if (x < 0) x += 2.0 * kPi;
  return x - kPi;
}

}  // namespace

Pendulum::Pendulum()
    : BuiltinEnv(EnvSpec{"pendulum", 3, 1, {-kMaxTorque}, {kMaxTorque}, 200, 0.05}) {}

void Pendulum::reset_state(Rng& rng) {
  theta_ = rng.uniform(-std::numbers::pi, std::numbers::pi);
  theta_dot_ = rng.uniform(-1.0, 1.0);
}

double Pendulum::advance(std::span<const double> action) {
  const double u = action[0];
  const double dt = spec().dt;
  const double th = wrap_angle(theta_);
  const double cost = th * th + 0.1 * theta_dot_ * theta_dot_ + 0.001 * u * u;
  const double accel = 3.0 * kGravity / (2.0 * kLength) * std::sin(theta_) + 3.0 / (kMass * kLength * kLength) * u;
  theta_dot_ = std::clamp(theta_dot_ + accel * dt, -kMaxSpeed, kMaxSpeed);
  theta_ = theta_ + theta_dot_ * dt;
  return -cost;
}

std::vector<double> Pendulum::observe() const { return {std::cos(theta_), std::sin(theta_), theta_dot_}; }

PointMass::PointMass() : BuiltinEnv(EnvSpec{"pointmass", 6, 2, {-1.0, -1.0}, {1.0, 1.0}, 100, 0.05}) {}

void PointMass::set_state(std::span<const double, 2> pos, std::span<const double, 2> vel,
                          std::span<const double, 2> goal) {
  for (int i = 0; i < 2; ++i) {
    pos_[i] = pos[i];
    vel_[i] = vel[i];
    goal_[i] = goal[i];
  }
}

void PointMass::reset_state(Rng& rng) {
  for (int i = 0; i < 2; ++i) {
    pos_[i] = rng.uniform(-kStartBox, kStartBox);
    vel_[i] = 0.0;
  }
  for (int i = 0; i < 2; ++i) goal_[i] = rng.uniform(-kGoalBox, kGoalBox);
}

double PointMass::advance(std::span<const double> action) {
  const double dt = spec().dt;
  double dist2 = 0.0;
  for (int i = 0; i < 2; ++i) {
    vel_[i] = std::clamp(vel_[i] + action[i] * dt, -kMaxSpeed, kMaxSpeed);
    pos_[i] += vel_[i] * dt;
    if (pos_[i] > 1.0 || pos_[i] < -1.0) {
      pos_[i] = std::clamp(pos_[i], -1.0, 1.0);
      vel_[i] = 0.0;
    }
    const double diff = pos_[i] - goal_[i];
    dist2 += diff * diff;
  }
  return -std::sqrt(dist2);
}

std::vector<double> PointMass::observe() const {
  return {pos_[0], pos_[1], vel_[0], vel_[1], goal_[0], goal_[1]};
}

DelayedReward::DelayedReward(std::unique_ptr<Env> inner, int delay) : inner_(std::move(inner)), delay_(delay) {
  if (delay < 1) throw std::invalid_argument("DelayedReward: delay must be >= 1");
  if (!inner_) throw std::invalid_argument("DelayedReward: null inner environment");
}

DelayedReward::DelayedReward(const DelayedReward& other)
    : inner_(other.inner_->clone()), delay_(other.delay_), t_(other.t_), pending_(other.pending_) {}

std::vector<double> DelayedReward::reset(std::uint64_t seed) {
  t_ = 0;
  pending_ = 0.0;
  return inner_->reset(seed);
}

StepResult DelayedReward::step(std::span<const double> action) {
  StepResult result = inner_->step(action);
  ++t_;
  pending_ += result.reward;
  if (t_ % delay_ == 0 || result.done) {
    result.reward = pending_;
    pending_ = 0.0;
  } else {
    result.reward = 0.0;
  }
  return result;
}

bool is_known_env(const std::string& name) { return name == "pendulum" || name == "pointmass"; }

std::unique_ptr<Env> make_env(const std::string& name, int delay) {
  if (delay < 1) throw std::invalid_argument("make_env: delay must be >= 1");
  std::unique_ptr<Env> env;
  if (name == "pendulum")
    env = std::make_unique<Pendulum>();
  else if (name == "pointmass")
    env = std::make_unique<PointMass>();
  else
    throw std::invalid_argument("unknown environment '" + name + "' (expected pendulum or pointmass)");
  if (delay > 1) env = std::make_unique<DelayedReward>(std::move(env), delay);
  return env;
}

}  // namespace ohtes::envs
