#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

#include "ohtes/envs.hpp"
#include "ohtes/rng.hpp"
#include "ohtes/td3.hpp"

namespace ohtes::harness {

/// Mean undiscounted return of the noise-free policy; episode e resets with
/// derive_seed(seed, e).
double evaluate_policy(const td3::AgentParams& agent, const envs::Env& env, int episodes, std::uint64_t seed);

/// Mean undiscounted return of the uniform-random policy, seeded as above.
double random_policy_return(const envs::Env& env, int episodes, std::uint64_t seed);

/// (R - L) / (U - L), unclipped. Throws std::invalid_argument unless U > L.
double normalized_score(double r, double low, double high);

/// Normalized scores Z[algo][task][tick]. NaN marks a masked cell.
struct ScoreTable {
  std::vector<std::string> algos;
  std::vector<std::string> tasks;
  std::vector<std::int64_t> ticks;  // environment step of each tick
  std::vector<double> low;          // per task
  std::vector<double> high;         // per task
  std::int64_t tick_steps = 0;
  std::vector<double> z;

  ScoreTable() = default;
  ScoreTable(std::size_t n_algos, std::size_t n_tasks, std::size_t n_ticks);

  std::size_t num_algos() const { return algos.size(); }
  std::size_t num_tasks() const { return tasks.size(); }
  std::size_t num_ticks() const { return ticks.size(); }
  double& at(std::size_t algo, std::size_t task, std::size_t tick) {
    return z[(algo * num_tasks() + task) * num_ticks() + tick];
  }
  double at(std::size_t algo, std::size_t task, std::size_t tick) const {
    return z[(algo * num_tasks() + task) * num_ticks() + tick];
  }
};

/// Per-algorithm curves, indexed [algo][tick].
struct StatsCurves {
  std::vector<std::vector<double>> mean;
  std::vector<std::vector<double>> median;
  std::vector<std::vector<double>> best_ratio;
};

/// At every tick, across tasks: mean and median of Z for each algorithm, and the
/// fraction of tasks on which the algorithm attains the maximum Z. Tied maxima
/// split the task equally. Masked cells are skipped; a task with no unmasked
/// algorithm does not count toward best_ratio. Throws std::invalid_argument on an
/// empty table.
StatsCurves aggregate_stats(const ScoreTable& table);

/// Synthetic instance of the one-step meta-objective chain:
/// psi'(eta) = psi_t + eta * g and L(psi) = -1/2 psi^T A psi + b^T psi.
struct Prop1Problem {
  Eigen::MatrixXd a;
  Eigen::VectorXd b;
  Eigen::VectorXd g;
  Eigen::VectorXd psi;
  double mu = 0.0;

  double objective(double eta) const;
  // d/deta L(psi + eta g) = (b - A psi'(eta)) . g
  double directional_gradient(double eta) const;
  void validate() const;
};

Prop1Problem make_scalar_prop1(double a, double b, double psi, double g, double mu);

struct Prop1Result {
  double es_estimate = 0.0;
  double analytic = 0.0;
  double relative_error = 0.0;  // |es - analytic| / |analytic|, or absolute when flagged
  double standard_error = 0.0;  // of es_estimate
  bool absolute = false;        // analytic ~ 0: relative_error holds the absolute error
};

/// ES estimate (1 / (sigma N)) sum_j L(psi'(eta_j)) eps_j with eta_j = mu + sigma eps_j,
/// eps_j ~ N(0, 1), against the analytic [grad L]_{psi_t + mu g} . g.
/// Draws come in antithetic pairs eps, -eps (each marginally Gaussian); an odd N
/// takes one unpaired draw at the end.
Prop1Result prop1_check(const Prop1Problem& problem, double sigma, std::int64_t n, Rng& rng);

/// Paired reparameterized (pathwise) estimate mean_j dL(psi'(mu + sigma eps_j))/deta
/// and the REINFORCE-form estimate on the same eps_j.
struct PairedEstimates {
  double reinforce_mean = 0.0;
  double pathwise_mean = 0.0;
  double difference_mean = 0.0;
  double difference_stderr = 0.0;
};
PairedEstimates prop1_paired(const Prop1Problem& problem, double sigma, std::int64_t n, Rng& rng);

}  // namespace ohtes::harness
