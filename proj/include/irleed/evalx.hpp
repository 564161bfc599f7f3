#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "irleed/demonstrators.hpp"
#include "irleed/softrl.hpp"

namespace irleed {

struct EvalReport {
  double mean_return = 0.0;
  int n_episodes = 0;
  double std_error = 0.0;
  std::string method;
  std::string setting_id;
  std::uint64_t seed = 0;
};

/// Mean discounted return of `policy` under the true reward, from n_episodes
/// rollouts. Needs state-only features (r(s) = theta^T f(s, .)).
EvalReport evaluate_policy(const TabularMdp& mdp, const FeatureMap& features, const Mat& policy,
                           const Vec& true_theta, int n_episodes, Rng& rng);

/// theta^T f-bar(pi): the expected discounted return, computed exactly.
double exact_return(const TabularMdp& mdp, const FeatureMap& features, const Mat& policy, const Vec& theta);

/// Expected return of the greedy optimal policy (standard Bellman value
/// iteration, same terminal convention as the soft solver).
double bellman_optimal_return(const TabularMdp& mdp, const FeatureMap& features, const Vec& theta,
                              double tol = 1e-12, int max_iters = 100000);

struct ReturnRange {
  double min = 0.0;
  double max = 1.0;
};

/// Bounds on any discounted return: min(0, min r) / (1 - gamma) and max(0, max r) / (1 - gamma).
ReturnRange return_range(const TabularMdp& mdp, const FeatureMap& features, const Vec& theta);

struct Improvement {
  double value = 0.0;
  bool shifted = false;  // true when the min-max normalized difference was used
};

/// Ratio variant (R_a - R_b) / |R_b| when R_b > 0 and R_a >= 0. Otherwise
/// both returns are min-max normalized with `range` and the difference of
/// the normalized scores is reported, tagged shifted.
Improvement relative_improvement(double irleed_return, double irl_return, const ReturnRange& range);
Improvement relative_improvement(const EvalReport& irleed, const EvalReport& irl, const ReturnRange& range);

struct Prop2Report {
  double lhs = 0.0;                  // E_{pi_IRL}[r]
  double rhs = 0.0;                  // (1/N) sum_i E_{pi_i}[r]
  double gap = 0.0;                  // lhs - rhs
  double soft_optimal = 0.0;         // E_{pi_theta*}[r], soft policy under the true weights
  double bellman_optimal = 0.0;      // greedy optimum
  std::vector<double> demonstrator_returns;
};

/// Exact-occupancy comparison of the IRL policy with the demonstrators it was trained on.
Prop2Report prop2_check(const TabularMdp& mdp, const FeatureMap& features, const Vec& true_theta,
                        const std::vector<DemonstratorParams>& demonstrators, const Mat& irl_policy,
                        const SoftViOptions& vi = {});

/// sum_s d(s) sum_a pi(a|s) (-log pi(a|s)) over the exact discounted visitation.
double discounted_causal_entropy(const TabularMdp& mdp, const Mat& policy);

/// theta reshaped to height x width (row-major) and min-max normalized to
/// [0, 1]. A constant theta maps to zeros.
Mat reward_grid_export(const Vec& theta, const GridworldSpec& spec);

void write_grid_csv(std::ostream& out, const Mat& grid);
/// Binary 8-bit PGM (P5), value = round(255 * v).
void write_grid_pgm(std::ostream& out, const Mat& grid);

}  // namespace irleed
