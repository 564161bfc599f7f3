#pragma once

#include <string>
#include <vector>

#include "irleed/rollout.hpp"
#include "irleed/softrl.hpp"

namespace irleed {

enum class ExpectationMode { Exact, MonteCarlo };

struct ExpectationConfig {
  ExpectationMode mode = ExpectationMode::Exact;
  int n_episodes = 100;  // Monte-Carlo only; fresh episodes on every call
};

/// Feature expectation of `policy`, by exact occupancy or by Monte-Carlo rollouts.
Vec model_feature_expectation(const TabularMdp& mdp, const FeatureMap& features, const Mat& policy,
                              const ExpectationConfig& expectation, Rng& rng);

struct TraceRecord {
  std::string phase;  // "theta", "eps_beta", "irl"
  int outer = 0;
  int step = 0;
  double grad_norm = 0.0;    // sup-norm of the gradient driving this step
  double theta_delta = 0.0;  // sup-norm of the theta change made by this step
  double theta_norm = 0.0;
};

/// Objective contribution and feature residual of one reward-weight vector u:
///   objective = u^T f~ - sum_s p0(s) V_soft(s; u),  residual = f~ - f-bar(pi_u).
struct WeightEvaluation {
  double objective = 0.0;
  Vec residual;
  SoftSolution solution;
};

WeightEvaluation evaluate_weights(const TabularMdp& mdp, const FeatureMap& features, const Vec& u,
                                  const Vec& empirical, const ExpectationConfig& expectation, Rng& rng,
                                  const SoftViOptions& vi);

/// Largest objective drop attributable to value-iteration error rather than
/// to the step itself: 2 n gamma tol / (1 - gamma) for n soft solves.
double objective_slack(const TabularMdp& mdp, const SoftViOptions& vi, int n_solves);

struct IrlConfig {
  double lr_theta = 0.2;
  double tol_theta = 1e-4;
  double theta_init_value = 0.1;
  Vec theta_init;  // overrides theta_init_value when non-empty
  ExpectationConfig expectation;
  int max_outer_steps = 20000;
  bool record_theta_history = false;
  /// Halve the step size (for the rest of the run) whenever a step lowers the
  /// objective by more than objective_slack(). Never triggers while plain
  /// steps keep ascending.
  bool monotone_safeguard = true;
  SoftViOptions vi;

  void validate() const;
  Vec initial_theta(int k) const;
};

struct IrlResult {
  Vec theta;
  SoftSolution solution;
  std::vector<TraceRecord> trace;
  std::vector<Vec> theta_history;  // initial theta, then one entry per step
  bool converged = false;
  int steps = 0;
  int rejected_steps = 0;
  double final_lr = 0.0;
};

/// f~_D (pooled) - f-bar of the soft policy under theta.
Vec irl_gradient(const Vec& theta, const std::vector<Trajectory>& pooled, const TabularMdp& mdp,
                 const FeatureMap& features, const IrlConfig& config, Rng& rng);

/// Gradient ascent on theta until lr_theta * |grad|_inf <= tol_theta, i.e. a
/// plain step would move theta by at most tol_theta. Without convergence the iterate with the smallest
/// gradient sup-norm is returned and `converged` is false.
IrlResult train_irl(const std::vector<Trajectory>& pooled, const TabularMdp& mdp, const FeatureMap& features,
                    const IrlConfig& config, Rng& rng);

/// train_irl against a given data feature expectation, e.g. an exact one in the population limit.
IrlResult train_irl_from_expectation(const Vec& empirical, const TabularMdp& mdp, const FeatureMap& features,
                                     const IrlConfig& config, Rng& rng);

}  // namespace irleed
