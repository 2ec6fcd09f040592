#include <doctest.h>

#include <cmath>
#include <numeric>

#include "ohtes/envs.hpp"
#include "ohtes/errors.hpp"
#include "ohtes/tuners.hpp"
#include "doubles.hpp"
#include "oracles.hpp"

using namespace ohtes;
using namespace ohtes::tuners;

namespace {

using doubles::ShortEnv;

const std::vector<int> kTiny{8};

td3::Td3Hyper tiny_hyper() {
  td3::Td3Hyper h;
  h.batch_size = 8;
  h.grad_steps_per_round = 2;
  return h;
}

std::vector<FitnessRecord> records_1d(const std::vector<double>& etas, const std::vector<double>& fitness) {
  std::vector<FitnessRecord> out;
  for (std::size_t j = 0; j < etas.size(); ++j) {
    FitnessRecord r;
    r.eta = {etas[j]};
    r.fitness = fitness[j];
    out.push_back(r);
  }
  return out;
}

std::vector<FitnessRecord> index_records(const std::vector<int>& picks, const std::vector<double>& fitness) {
  std::vector<FitnessRecord> out;
  for (std::size_t j = 0; j < picks.size(); ++j) {
    FitnessRecord r;
    r.index = picks[j];
    r.fitness = fitness[j];
    out.push_back(r);
  }
  return out;
}

GaussianTunerState gaussian(double mu, double sigma, int n, GaussianMode mode = GaussianMode::kEsGradient) {
  GaussianTunerState s;
  s.mean = {mu};
  s.sigma = {sigma};
  s.population = n;
  s.mode = mode;
  return s;
}

void warm(Workspace& ws, int episodes) {
  Rng rng(99);
  for (int e = 0; e < episodes; ++e) ws.collect(nullptr, 0.0, rng);
}

}  // namespace

TEST_CASE("gaussian_sample: degenerate, mean and reproducibility") {
  auto tiny = gaussian(-3.0, 1e-12, 10);
  Rng rng(1);
  for (const auto& eta : gaussian_sample(tiny, rng).etas) CHECK(std::abs(eta[0] + 3.0) < 1e-10);

  auto wide = gaussian(0.7, 2.0, 100000);
  const auto s = gaussian_sample(wide, rng);
  double mean = 0.0;
  for (const auto& eta : s.etas) mean += eta[0];
  mean /= 1e5;
  CHECK(std::abs(mean - 0.7) < 3.0 * 2.0 / std::sqrt(1e5));
  for (std::size_t j = 0; j < 10; ++j) CHECK(s.etas[j][0] == 0.7 + 2.0 * s.noises[j][0]);

  Rng a(5), b(5);
  CHECK(gaussian_sample(wide, a).etas == gaussian_sample(wide, b).etas);
  CHECK_THROWS_AS(gaussian_sample(gaussian(0.0, 0.0, 4), a), std::invalid_argument);
  CHECK_THROWS_AS(gaussian_sample(gaussian(0.0, 1.0, 1), a), std::invalid_argument);
}

TEST_CASE("es_gradient_update examples") {
  auto raw = gaussian(0.0, 1.0, 2);
  raw.beta = 1.0;
  raw.standardize = false;
  es_gradient_update(raw, records_1d({1.0, -1.0}, {1.0, -1.0}));
  CHECK(raw.mean[0] == 1.0);
  CHECK(raw.sigma[0] == 1.0);

  auto equal = gaussian(-3.0, 0.5, 4);
  es_gradient_update(equal, records_1d({-2.0, -3.5, -3.1, -2.2}, {7.0, 7.0, 7.0, 7.0}));
  CHECK(equal.mean[0] == -3.0);

  auto a = gaussian(0.25, 0.5, 3), b = a;
  es_gradient_update(a, records_1d({0.5, 0.0, 1.25}, {2.0, -1.0, 4.0}));
  es_gradient_update(b, records_1d({0.0, 0.5, -0.75}, {-2.0, 1.0, -4.0}));
  CHECK(a.mean[0] == doctest::Approx(b.mean[0]).epsilon(1e-14));

  auto bad = gaussian(0.0, 1.0, 2);
  CHECK_THROWS_AS(es_gradient_update(bad, records_1d({1.0, 2.0}, {1.0, NAN})), NumericError);
  CHECK_THROWS_AS(es_gradient_update(bad, records_1d({1.0}, {1.0})), std::invalid_argument);
}

TEST_CASE("raw ES estimator is unbiased for a linear fitness") {
  auto s = gaussian(0.0, 1.0, 100000);
  s.beta = 1.0;
  s.standardize = false;
  Rng rng(17);
  const auto sample = gaussian_sample(s, rng);
  std::vector<double> f;
  for (const auto& eta : sample.etas) f.push_back(eta[0]);
  es_gradient_update(s, records_1d(f, f));
  CHECK(std::abs(s.mean[0] - 1.0) < 0.01);
}

TEST_CASE("affine fitness shift leaves updates unchanged") {
  const std::vector<double> etas{0.5, -1.0, 2.0, 0.25};
  const std::vector<double> f{0.0, 1.0, 2.0, 5.0}, shifted{100.0, 101.0, 102.0, 105.0};
  auto a = gaussian(0.0, 0.5, 4), b = a;
  es_gradient_update(a, records_1d(etas, f));
  es_gradient_update(b, records_1d(etas, shifted));
  CHECK(a.mean == b.mean);

  CHECK(elite_indices(records_1d(etas, f)) == elite_indices(records_1d(etas, shifted)));
  auto c = gaussian(0.0, 0.5, 4, GaussianMode::kCem), d = c;
  cem_update(c, records_1d(etas, f));
  cem_update(d, records_1d(etas, shifted));
  CHECK(c.mean == d.mean);
  CHECK(c.sigma == d.sigma);
}

TEST_CASE("cem_update examples") {
  auto s = gaussian(0.0, 1.0, 4, GaussianMode::kCem);
  cem_update(s, records_1d({0.0, 1.0, 2.0, 3.0}, {0.0, 1.0, 2.0, 3.0}));
  CHECK(s.mean[0] == 2.5);
  CHECK(s.sigma[0] * s.sigma[0] == doctest::Approx(0.25 + 1e-4).epsilon(1e-12));

  auto same = gaussian(0.0, 1.0, 4, GaussianMode::kCem);
  cem_update(same, records_1d({1.5, 1.5, 1.5, 1.5}, {3.0, -1.0, 0.0, 2.0}));
  CHECK(same.mean[0] == 1.5);
  CHECK(same.sigma[0] == doctest::Approx(1e-2).epsilon(1e-12));

  Rng rng(3);
  auto r = gaussian(0.0, 1.0, 6, GaussianMode::kCem);
  for (int i = 0; i < 50; ++i) {
    const auto sample = gaussian_sample(r, rng);
    std::vector<double> etas, f;
    for (const auto& eta : sample.etas) {
      etas.push_back(eta[0]);
      f.push_back(rng.normal());
    }
    cem_update(r, records_1d(etas, f));
    CHECK(r.sigma[0] >= std::sqrt(1e-4));
  }
  auto es = gaussian(0.0, 1.0, 4);
  CHECK_THROWS_AS(cem_update(es, records_1d({0.0, 1.0, 2.0, 3.0}, {0.0, 1.0, 2.0, 3.0})), std::invalid_argument);
}

TEST_CASE("categorical sampling statistics") {
  auto uniform = make_categorical({1, 2, 3, 4, 5}, 0.0);
  Rng rng(7);
  std::vector<int> counts(5, 0);
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) ++counts[static_cast<std::size_t>(categorical_sample(uniform, rng))];
  double chi2 = 0.0;
  for (int c : counts) chi2 += (c - draws / 5.0) * (c - draws / 5.0) / (draws / 5.0);
  CHECK(chi2 < 18.47);  // 0.999 quantile, 4 degrees of freedom

  auto peaked = make_categorical({1, 2, 3, 4, 5}, 0.1);
  peaked.logits = {0.0, 0.0, 20.0, 0.0, 0.0};
  int hits = 0;
  for (int i = 0; i < draws; ++i) hits += categorical_sample(peaked, rng) == 2;
  CHECK(std::abs(hits / static_cast<double>(draws) - (0.9 + 0.1 / 5.0)) < 5e-3);
  const auto p = sampling_probabilities(peaked);
  CHECK(std::accumulate(p.begin(), p.end(), 0.0) == doctest::Approx(1.0));
  for (double x : p) CHECK(x >= 0.1 / 5.0 - 1e-15);

  auto all_uniform = make_categorical({1, 2, 3}, 1.0);
  all_uniform.logits = {0.0, 30.0, 0.0};
  std::vector<int> c3(3, 0);
  for (int i = 0; i < 30000; ++i) ++c3[static_cast<std::size_t>(categorical_sample(all_uniform, rng))];
  for (int c : c3) CHECK(std::abs(c - 10000) < 500);
}

TEST_CASE("score-function direction and update") {
  auto s = make_categorical({1, 2, 3});
  s.standardize = false;
  const auto dir = score_function_direction(s, index_records({1}, {1.0}));
  CHECK(dir[0] == doctest::Approx(-1.0 / 3.0));
  CHECK(dir[1] == doctest::Approx(2.0 / 3.0));
  CHECK(dir[2] == doctest::Approx(-1.0 / 3.0));

  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    auto t = make_categorical({1, 2, 3, 4, 5});
    t.standardize = false;
    for (double& l : t.logits) l = rng.normal();
    std::vector<int> picks;
    std::vector<double> f;
    for (int j = 0; j < 6; ++j) {
      picks.push_back(static_cast<int>(rng.below(5)));
      f.push_back(rng.normal());
    }
    const auto got = score_function_direction(t, index_records(picks, f));
    const auto ref = oracle::score_direction_fd(t.logits, picks, f);
    for (std::size_t k = 0; k < got.size(); ++k) CHECK(std::abs(got[k] - ref[k]) < 1e-6);
  }

  auto equal = make_categorical({1, 2, 3});
  equal.logits = {0.5, -0.25, -0.25};
  score_function_update(equal, index_records({0, 1, 2, 0, 1, 2}, {3.0, 3.0, 3.0, 3.0, 3.0, 3.0}));
  CHECK(equal.logits == std::vector<double>{0.5, -0.25, -0.25});

  auto walk = make_categorical({1, 2, 3, 4});
  for (int i = 0; i < 100; ++i) {
    std::vector<int> picks;
    std::vector<double> f;
    for (int j = 0; j < 6; ++j) {
      picks.push_back(categorical_sample(walk, rng));
      f.push_back(100.0 * rng.normal());
    }
    score_function_update(walk, index_records(picks, f));
    const auto p = softmax(walk.logits);
    CHECK(std::accumulate(p.begin(), p.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(std::accumulate(walk.logits.begin(), walk.logits.end(), 0.0)) < 1e-12);
    for (double l : walk.logits) CHECK(std::isfinite(l));
    for (double x : sampling_probabilities(walk)) CHECK(x >= 0.1 / 4.0 - 1e-15);
  }

  auto single = make_categorical({3});
  CHECK(score_function_direction(single, index_records({0, 0}, {1.0, -4.0})) == std::vector<double>{0.0});
  CHECK_THROWS_AS(make_categorical({1, 2}, 1.5), std::invalid_argument);
  CHECK_THROWS_AS(score_function_direction(s, index_records({3}, {1.0})), std::invalid_argument);
}

TEST_CASE("fitness_estimate") {
  CHECK(fitness_estimate(std::vector<double>{100.0}) == 100.0);
  CHECK(fitness_estimate(std::vector<double>{0.0, 10.0}) == 5.0);
  CHECK_THROWS_AS(fitness_estimate(std::vector<double>{}), Unavailable);

  auto plain = envs::make_env("pendulum");
  auto delayed = envs::make_env("pendulum", 5);
  const auto agent = td3::make_agent(plain->spec(), kTiny, 3);
  Rng r1(1), r2(1);
  const auto a = run_episode(&agent, *plain, 42, 0.0, r1, 0);
  const auto b = run_episode(&agent, *delayed, 42, 0.0, r2, 0);
  CHECK(fitness_estimate(std::vector<double>{a.episode_return}) ==
        doctest::Approx(fitness_estimate(std::vector<double>{b.episode_return})).epsilon(1e-12));
}

TEST_CASE("learning-rate mapping clamps") {
  CHECK(learning_rate_from_log10(-3.0) == doctest::Approx(1e-3));
  CHECK(learning_rate_from_log10(2.0) == 1e-1);
  CHECK(learning_rate_from_log10(-9.0) == 1e-6);
  const auto h = with_learning_rates(td3::Td3Hyper{}, std::vector<double>{-2.0, -4.0});
  CHECK(h.lr_actor == doctest::Approx(1e-2));
  CHECK(h.lr_critic == doctest::Approx(1e-4));
  CHECK_THROWS_AS(with_learning_rates(td3::Td3Hyper{}, std::vector<double>{}), std::invalid_argument);
}

TEST_CASE("continuous round: counting, degenerate sigma and a rigged fitness") {
  ShortEnv env(10);
  replay::ReplayBuffer buffer(10000, 1, 1);
  Workspace ws(buffer, env, 5);
  warm(ws, 5);

  auto agent = td3::make_agent(env.spec(), kTiny, 1);
  Rng main_rng(2), tuner_rng(3);
  ContinuousRoundConfig config{tiny_hyper(), {}, {}};

  auto tuner = gaussian(-3.0, 1e-12, 10);
  tuner.mean = {-3.0, -3.0};
  tuner.sigma = {1e-12, 1e-12};
  config.probe = [](const Eta&, double) { return 1.0; };
  const auto m = oht_es_continuous_round(agent, main_rng, tuner, ws, config, tuner_rng);
  CHECK(m.episodes == 11);
  CHECK(m.buffer_insertions == 110);
  CHECK(m.env_steps == 110);
  CHECK(m.fitness.size() == 10);
  CHECK(tuner.mean == std::vector<double>{-3.0, -3.0});

  auto rigged = gaussian(-3.0, 0.5, 10);
  config.probe = [](const Eta& eta, double) { return eta.values[0]; };
  double prev = rigged.mean[0];
  for (int round = 0; round < 5; ++round) {
    oht_es_continuous_round(agent, main_rng, rigged, ws, config, tuner_rng);
    CHECK(rigged.mean[0] > prev);
    prev = rigged.mean[0];
  }

  auto cem = gaussian(-3.0, 0.5, 10, GaussianMode::kCem);
  oht_es_continuous_round(agent, main_rng, cem, ws, config, tuner_rng);
  CHECK(cem.mean[0] > -3.0);
}

TEST_CASE("discrete round: counting, K=1 and a rigged bandit") {
  ShortEnv env(3);
  replay::ReplayBuffer buffer(20000, 1, 1);
  Workspace ws(buffer, env, 6);
  warm(ws, 5);

  auto members = [&](std::size_t k) {
    std::vector<Member> out;
    for (std::size_t i = 0; i < k; ++i) out.push_back({td3::make_agent(env.spec(), kTiny, 10 + i), Rng(20 + i)});
    return out;
  };

  auto single = make_categorical({3});
  auto one = members(1);
  DiscreteRoundConfig config{tiny_hyper(), true, {}};
  Rng tuner_rng(8);
  const auto m = oht_es_discrete_round(one, single, ws, config, tuner_rng);
  CHECK(m.episodes == 6);
  CHECK(m.buffer_insertions == 18);
  CHECK(single.logits == std::vector<double>{0.0});

  auto fresh = make_categorical({1, 2, 3});
  for (double x : sampling_probabilities(fresh)) CHECK(x == doctest::Approx(1.0 / 3.0));

  auto bandit = make_categorical({1, 2, 3, 4, 5});
  auto agents = members(5);
  config.hyper.grad_steps_per_round = 1;
  config.train_all_agents = false;
  config.probe = [&](const Eta& eta, double) { return bandit.support[static_cast<std::size_t>(eta.index)] == 3 ? 1.0 : 0.0; };
  double best = 0.0;
  for (int u = 0; u < 200 && best <= 0.8; ++u) {
    oht_es_discrete_round(agents, bandit, ws, config, tuner_rng);
    best = softmax(bandit.logits)[2];
  }
  CHECK(best > 0.8);
}

TEST_CASE("es-rl round: buffer growth and collapse") {
  ShortEnv env(4);
  replay::ReplayBuffer buffer(10000, 1, 1);
  Workspace ws(buffer, env, 7);
  warm(ws, 5);

  auto state = make_es_rl(td3::make_agent(env.spec(), kTiny, 1), 1e-3, 6, 2);
  Rng rng(5);
  EsRlConfig config{tiny_hyper(), {}};
  const auto before = buffer.total_appended();
  const auto m = es_rl_round(state, ws, config, rng);
  CHECK(buffer.total_appended() - before == 24);
  CHECK(m.episodes == 6);
  CHECK(state.core.actor.flatten() == state.mean);

  auto frozen = make_es_rl(td3::make_agent(env.spec(), kTiny, 2), 0.0, 4, 0, 0.0);
  const auto mean = frozen.mean;
  es_rl_round(frozen, ws, config, rng);
  CHECK(frozen.mean == mean);
  for (float v : frozen.variance) CHECK(v == 0.0f);
  CHECK_THROWS_AS(make_es_rl(td3::make_agent(env.spec(), kTiny, 2), 1e-3, 4, 5), std::invalid_argument);
}
