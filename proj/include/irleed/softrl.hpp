#pragma once

#include <json.hpp>

#include "irleed/mdp.hpp"

namespace irleed {

/// Soft Q/V and the Boltzmann policy pi(a|s) = exp(q(s,a) - v(s)).
struct SoftSolution {
  Mat q;       // [s][a]
  Vec v;       // [s]
  Mat policy;  // [s][a]
  int iterations = 0;
  double residual = 0.0;  // sup-norm change of v on the final sweep
  bool converged = false;
};

struct SoftViOptions {
  double tol = 1e-4;
  int max_iters = 10000;
};

/// Soft value of the zero-reward absorbing phase that follows a terminal
/// step: log|A| / (1 - gamma). It does not depend on the reward weights.
double post_terminal_value(const TabularMdp& mdp);

/// Iterates q = w^T f + gamma E[v(s')], v = logsumexp_a q from v = 0 until the
/// sup-norm change in v drops to `tol`. Terminal states collect their own
/// reward and then continue with post_terminal_value() instead of E[v(s')].
/// Hitting max_iters returns the last iterate with converged = false.
SoftSolution soft_value_iteration(const TabularMdp& mdp, const FeatureMap& features,
                                  const Vec& reward_weights, const SoftViOptions& options = {});

/// Demonstrator policy pi ∝ exp(beta * Q_soft(theta + epsilon)) with the
/// beta-aware normalizer, computed by folding beta into the reward weights:
/// u = beta * (theta + epsilon). Rejects beta < 0.
SoftSolution demonstrator_policy(const TabularMdp& mdp, const FeatureMap& features, const Vec& theta,
                                 const Vec& epsilon, double beta, const SoftViOptions& options = {});

/// Discounted state visitation d(s) = E[sum_t gamma^t 1{s_t = s}] up to and
/// including the terminal step. Exact linear solve.
Vec state_visitation(const TabularMdp& mdp, const Mat& policy);

/// rho(s, a) = d(s) pi(a|s).
Mat state_action_occupancy(const TabularMdp& mdp, const Mat& policy);

/// E_pi[sum_t gamma^t f(s_t, a_t)] from the exact occupancy.
Vec exact_feature_expectation(const TabularMdp& mdp, const FeatureMap& features, const Mat& policy);

nlohmann::json soft_solution_to_json(const SoftSolution& sol);

}  // namespace irleed
