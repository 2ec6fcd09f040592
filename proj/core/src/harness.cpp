#include "ohtes/harness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "ohtes/rollout.hpp"

namespace ohtes::harness {

double evaluate_policy(const td3::AgentParams& agent, const envs::Env& env, int episodes, std::uint64_t seed) {
  if (episodes < 1) throw std::invalid_argument("evaluate_policy: episodes must be >= 1");
  auto local = env.clone();
  Rng unused(0);
  double total = 0.0;
  for (int e = 0; e < episodes; ++e)
    total += run_episode(&agent, *local, derive_seed(seed, static_cast<std::uint64_t>(e)), 0.0, unused, e)
                 .episode_return;
  return total / episodes;
}

double random_policy_return(const envs::Env& env, int episodes, std::uint64_t seed) {
  if (episodes < 1) throw std::invalid_argument("random_policy_return: episodes must be >= 1");
  auto local = env.clone();
  Rng rng(derive_seed(seed, "random-policy"));
  double total = 0.0;
  for (int e = 0; e < episodes; ++e)
    total += run_episode(nullptr, *local, derive_seed(seed, static_cast<std::uint64_t>(e)), 0.0, rng, e)
                 .episode_return;
  return total / episodes;
}

double normalized_score(double r, double low, double high) {
  if (!(high > low)) throw std::invalid_argument("normalized_score: requires high > low");
  return (r - low) / (high - low);
}

ScoreTable::ScoreTable(std::size_t n_algos, std::size_t n_tasks, std::size_t n_ticks)
    : algos(n_algos), tasks(n_tasks), ticks(n_ticks), low(n_tasks, 0.0), high(n_tasks, 1.0),
      z(n_algos * n_tasks * n_ticks, std::numeric_limits<double>::quiet_NaN()) {}

StatsCurves aggregate_stats(const ScoreTable& table) {
  const std::size_t na = table.num_algos(), nt = table.num_tasks(), nk = table.num_ticks();
  if (na == 0 || nt == 0 || nk == 0) throw std::invalid_argument("aggregate_stats: empty table");
  if (table.z.size() != na * nt * nk) throw std::invalid_argument("aggregate_stats: table size mismatch");
  const double nan = std::numeric_limits<double>::quiet_NaN();

  StatsCurves out;
  out.mean.assign(na, std::vector<double>(nk, nan));
  out.median.assign(na, std::vector<double>(nk, nan));
  out.best_ratio.assign(na, std::vector<double>(nk, nan));

  std::vector<double> values;
  for (std::size_t k = 0; k < nk; ++k) {
    for (std::size_t i = 0; i < na; ++i) {
      values.clear();
      for (std::size_t j = 0; j < nt; ++j) {
        const double v = table.at(i, j, k);
        if (!std::isnan(v)) values.push_back(v);
      }
      if (values.empty()) continue;
      double sum = 0.0;
      for (double v : values) sum += v;
      out.mean[i][k] = sum / static_cast<double>(values.size());
      std::sort(values.begin(), values.end());
      const std::size_t m = values.size();
      out.median[i][k] = m % 2 == 1 ? values[m / 2] : 0.5 * (values[m / 2 - 1] + values[m / 2]);
    }

    std::vector<double> wins(na, 0.0);
    std::size_t counted = 0;
    for (std::size_t j = 0; j < nt; ++j) {
      double best = -std::numeric_limits<double>::infinity();
      bool any = false;
      for (std::size_t i = 0; i < na; ++i) {
        const double v = table.at(i, j, k);
        if (std::isnan(v)) continue;
        any = true;
        best = std::max(best, v);
      }
      if (!any) continue;
      ++counted;
      std::size_t ties = 0;
      for (std::size_t i = 0; i < na; ++i)
        if (table.at(i, j, k) == best) ++ties;
      for (std::size_t i = 0; i < na; ++i)
        if (table.at(i, j, k) == best) wins[i] += 1.0 / static_cast<double>(ties);
    }
    if (counted == 0) continue;
    for (std::size_t i = 0; i < na; ++i) out.best_ratio[i][k] = wins[i] / static_cast<double>(counted);
  }
  return out;
}

double Prop1Problem::objective(double eta) const {
  const Eigen::VectorXd p = psi + eta * g;
  return -0.5 * p.dot(a * p) + b.dot(p);
}

double Prop1Problem::directional_gradient(double eta) const {
  const Eigen::VectorXd p = psi + eta * g;
  return (b - a * p).dot(g);
}

void Prop1Problem::validate() const {
  const Eigen::Index d = psi.size();
  if (d == 0 || a.rows() != d || a.cols() != d || b.size() != d || g.size() != d)
    throw std::invalid_argument("Prop1Problem: dimension mismatch");
  if (!a.isApprox(a.transpose())) throw std::invalid_argument("Prop1Problem: A must be symmetric");
}

Prop1Problem make_scalar_prop1(double a, double b, double psi, double g, double mu) {
  Prop1Problem p;
  p.a = Eigen::MatrixXd::Constant(1, 1, a);
  p.b = Eigen::VectorXd::Constant(1, b);
  p.psi = Eigen::VectorXd::Constant(1, psi);
  p.g = Eigen::VectorXd::Constant(1, g);
  p.mu = mu;
  return p;
}

namespace {

void check_sampling_args(double sigma, std::int64_t n) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw std::invalid_argument("prop1: sigma must be > 0");
  if (n < 1) throw std::invalid_argument("prop1: N must be >= 1");
}

struct Moments {
  double sum = 0.0;
  double sum_sq = 0.0;
  std::int64_t count = 0;

  void add(double v) {
    sum += v;
    sum_sq += v * v;
    ++count;
  }
  double mean() const { return sum / static_cast<double>(count); }
  double standard_error() const {
    if (count < 2) return std::numeric_limits<double>::infinity();
    const double m = mean();
    const double var = std::max(0.0, (sum_sq - count * m * m) / static_cast<double>(count - 1));
    return std::sqrt(var / static_cast<double>(count));
  }
};

}  // namespace

Prop1Result prop1_check(const Prop1Problem& problem, double sigma, std::int64_t n, Rng& rng) {
  problem.validate();
  check_sampling_args(sigma, n);
  const double mu = problem.mu;

  // Per-pair mean of the two terms, so the estimate is the mean over pairs.
  Moments pairs;
  const std::int64_t n_pairs = n / 2;
  for (std::int64_t p = 0; p < n_pairs; ++p) {
    const double eps = rng.normal();
    const double plus = problem.objective(mu + sigma * eps);
    const double minus = problem.objective(mu - sigma * eps);
    pairs.add(0.5 * (plus - minus) * eps / sigma);
  }
  double total = pairs.sum * 2.0;
  if (n % 2 == 1) {
    const double eps = rng.normal();
    total += problem.objective(mu + sigma * eps) * eps / sigma;
  }

  Prop1Result r;
  r.es_estimate = total / static_cast<double>(n);
  r.analytic = problem.directional_gradient(mu);
  r.standard_error = n_pairs >= 2 ? pairs.standard_error() : std::numeric_limits<double>::infinity();
  const double err = std::abs(r.es_estimate - r.analytic);
  r.absolute = std::abs(r.analytic) < 1e-12;
  r.relative_error = r.absolute ? err : err / std::abs(r.analytic);
  return r;
}

PairedEstimates prop1_paired(const Prop1Problem& problem, double sigma, std::int64_t n, Rng& rng) {
  problem.validate();
  check_sampling_args(sigma, n);
  Moments reinforce, pathwise, diff;
  for (std::int64_t j = 0; j < n; ++j) {
    const double eps = rng.normal();
    const double eta = problem.mu + sigma * eps;
    const double rf = problem.objective(eta) * eps / sigma;
    const double pw = problem.directional_gradient(eta);
    reinforce.add(rf);
    pathwise.add(pw);
    diff.add(rf - pw);
  }
  PairedEstimates out;
  out.reinforce_mean = reinforce.mean();
  out.pathwise_mean = pathwise.mean();
  out.difference_mean = diff.mean();
  out.difference_stderr = diff.standard_error();
  return out;
}

}  // namespace ohtes::harness
