#include <doctest.h>

#include <cmath>
#include <numbers>

#include "ohtes/envs.hpp"
#include "ohtes/rng.hpp"
#include "doubles.hpp"

using namespace ohtes;
using namespace ohtes::envs;

namespace {

using doubles::ScriptedEnv;

std::vector<double> emitted(std::vector<double> inner, int d) {
  DelayedReward env(std::make_unique<ScriptedEnv>(std::move(inner)), d);
  env.reset(0);
  std::vector<double> out;
  const std::vector<double> a{0.0};
  for (;;) {
    const auto r = env.step(a);
    out.push_back(r.reward);
    if (r.done) break;
  }
  return out;
}

}  // namespace

TEST_CASE("pendulum reset is deterministic per seed") {
  Pendulum a, b;
  CHECK(a.reset(17) == b.reset(17));
  CHECK(a.theta() == b.theta());
  CHECK(a.step_count() == 0);
  CHECK(a.reset(17) != a.reset(18));
  CHECK(std::abs(a.theta()) <= std::numbers::pi);
  CHECK(std::abs(a.theta_dot()) <= 1.0);
}

TEST_CASE("pendulum rewards at known states") {
  Pendulum p;
  p.reset(0);
  p.set_state(0.0, 0.0);
  const std::vector<double> zero{0.0};
  CHECK(p.step(zero).reward == 0.0);
  p.set_state(std::numbers::pi, 0.0);
  CHECK(p.step(zero).reward == doctest::Approx(-9.8696044).epsilon(1e-9));
}

TEST_CASE("pendulum dynamics, clamps and clip counting") {
  Pendulum p;
  p.reset(0);
  p.set_state(0.3, 0.5);
  const std::vector<double> u{5.0};  // clipped to 2
  const auto r = p.step(u);
  const double accel = 15.0 * std::sin(0.3) + 3.0 * 2.0;
  const double td = 0.5 + accel * 0.05;
  CHECK(p.theta_dot() == doctest::Approx(td).epsilon(1e-15));
  CHECK(p.theta() == doctest::Approx(0.3 + td * 0.05).epsilon(1e-15));
  CHECK(r.reward == doctest::Approx(-(0.09 + 0.1 * 0.25 + 0.001 * 4.0)).epsilon(1e-15));
  CHECK(p.clip_count() == 1);
  p.set_state(0.0, 7.99);
  p.step(std::vector<double>{2.0});
  CHECK(p.theta_dot() == 8.0);
  CHECK(r.obs.size() == 3);
}

TEST_CASE("pendulum time limit and step after done") {
  Pendulum p;
  CHECK_THROWS_AS(p.step(std::vector<double>{0.0}), std::logic_error);
  p.reset(3);
  StepResult r;
  for (int t = 0; t < 200; ++t) {
    CHECK_FALSE(r.done);
    r = p.step(std::vector<double>{0.1});
  }
  CHECK(r.done);
  CHECK_FALSE(r.terminal);
  CHECK(p.step_count() == 200);
  CHECK_THROWS_AS(p.step(std::vector<double>{0.0}), std::logic_error);
}

TEST_CASE("trajectories are bit-exact per seed and action sequence") {
  for (const char* name : {"pendulum", "pointmass"}) {
    auto a = make_env(name), b = make_env(name);
    a->reset(99);
    b->reset(99);
    Rng ra(1), rb(1);
    for (int t = 0; t < a->spec().episode_len; ++t) {
      std::vector<double> act(static_cast<std::size_t>(a->spec().act_dim));
      for (auto& x : act) x = ra.uniform(-3.0, 3.0);
      std::vector<double> act_b(act.size());
      for (auto& x : act_b) x = rb.uniform(-3.0, 3.0);
      const auto sa = a->step(act), sb = b->step(act_b);
      CHECK(sa.obs == sb.obs);
      CHECK(sa.reward == sb.reward);
    }
  }
}

TEST_CASE("pointmass start box, goal and reward") {
  PointMass pm;
  for (std::uint64_t s = 0; s < 50; ++s) {
    const auto obs = pm.reset(s);
    CHECK(std::abs(obs[0]) <= 0.5);
    CHECK(std::abs(obs[1]) <= 0.5);
    CHECK(obs[2] == 0.0);
    CHECK(obs[3] == 0.0);
    CHECK(std::abs(obs[4]) <= 0.9);
    CHECK(std::abs(obs[5]) <= 0.9);
  }
  const double pos[2] = {0.2, -0.1}, vel[2] = {0.0, 0.0};
  pm.set_state(pos, vel, pos);
  CHECK(pm.step(std::vector<double>{0.0, 0.0}).reward == 0.0);

  const double corner[2] = {0.99, 0.0}, fast[2] = {2.0, 0.0}, goal[2] = {0.0, 0.0};
  pm.set_state(corner, fast, goal);
  const auto r = pm.step(std::vector<double>{1.0, 0.0});
  CHECK(r.obs[0] == 1.0);
  CHECK(r.obs[2] == 0.0);
  CHECK(r.reward == doctest::Approx(-1.0));
}

TEST_CASE("delayed reward examples") {
  CHECK(emitted({1, 2, 3, 4, 5, 6, 7, 8, 9, 10}, 5) == std::vector<double>{0, 0, 0, 0, 15, 0, 0, 0, 0, 40});
  CHECK(emitted({1, 1, 1, 1, 1, 1}, 4) == std::vector<double>{0, 0, 0, 4, 0, 2});
  CHECK(emitted({0.5, -2, 3}, 1) == std::vector<double>{0.5, -2, 3});
  CHECK_THROWS_AS(DelayedReward(std::make_unique<ScriptedEnv>(std::vector<double>{1.0}), 0), std::invalid_argument);
  CHECK_THROWS_AS(make_env("pendulum", 0), std::invalid_argument);
  CHECK_THROWS_AS(make_env("cartpole"), std::invalid_argument);
}

TEST_CASE("delayed reward with d=1 matches the inner pendulum") {
  auto plain = make_env("pendulum");
  DelayedReward wrapped(make_env("pendulum"), 1);
  plain->reset(5);
  wrapped.reset(5);
  for (int t = 0; t < 200; ++t) {
    const std::vector<double> u{std::sin(0.1 * t)};
    CHECK(plain->step(u).reward == wrapped.step(u).reward);
  }
}

TEST_CASE("delayed reward flushes at a physical terminal") {
  DelayedReward env(std::make_unique<ScriptedEnv>(std::vector<double>{1, 2, 3}, true), 5);
  env.reset(0);
  const std::vector<double> a{0.0};
  CHECK(env.step(a).reward == 0.0);
  CHECK(env.step(a).reward == 0.0);
  const auto last = env.step(a);
  CHECK(last.terminal);
  CHECK(last.reward == 6.0);
}

TEST_CASE("delayed reward clone is independent") {
  DelayedReward env(make_env("pendulum"), 3);
  env.reset(1);
  env.step(std::vector<double>{1.0});
  auto copy = env.clone();
  const auto a = env.step(std::vector<double>{0.5});
  const auto b = copy->step(std::vector<double>{0.5});
  CHECK(a.obs == b.obs);
  CHECK(a.reward == b.reward);
}
