#pragma once

#include <vector>

#include <json.hpp>

#include "irleed/maxent_irl.hpp"

namespace irleed {

/// Shared reward weights plus per-demonstrator bias and precision.
struct IrleedEstimate {
  Vec theta;
  std::vector<Vec> epsilons;
  std::vector<double> betas;
  std::vector<TraceRecord> trace;
  std::vector<Vec> theta_history;  // filled when IrleedConfig::record_theta_history is set
  bool converged = true;           // false if any theta phase hit max_theta_steps
  int rejected_steps = 0;          // steps undone by the monotone safeguard

  int n_demonstrators() const { return static_cast<int>(betas.size()); }
  /// Reward weights the demonstrator is modelled to follow, before folding: theta + epsilon_i.
  Vec perceived_weights(int i) const { return theta + epsilons[i]; }
};

struct IrleedConfig {
  double lr_theta = 0.2;
  double lr_epsilon = 0.1;
  double lr_beta = 0.05;
  double tol = 1e-4;
  int outer_iterations = 2;
  int eps_beta_steps = 25;
  int max_theta_steps = 20000;
  double beta_init = 1.0;
  double theta_init_value = 0.1;
  Vec theta_init;  // overrides theta_init_value when non-empty
  double epsilon_l2 = 0.0;
  bool freeze_epsilon = false;
  bool freeze_beta = false;
  bool record_theta_history = false;
  /// Undo a step that lowers the objective by more than objective_slack() and
  /// halve that step size for the rest of the phase (per demonstrator in phase B).
  bool monotone_safeguard = true;
  ExpectationConfig expectation;
  SoftViOptions vi;

  void validate() const;
};

/// Starting point of training: theta_init, zero epsilons, beta_init everywhere.
IrleedEstimate initial_estimate(const IrleedConfig& config, int k, int n_demonstrators);

struct IrleedGradients {
  Vec theta;
  std::vector<Vec> epsilons;
  std::vector<double> betas;
  std::vector<Vec> residuals;  // f~_{D_i} - f-bar_i
};

/// Per-demonstrator empirical feature expectations f~_{D_i}, ordered like dataset.sets.
std::vector<Vec> demonstrator_feature_expectations(const MixedDataset& dataset, const FeatureMap& features,
                                                   double gamma);

/// Mean per-trajectory log-likelihood of the data, summed over demonstrators,
/// with the parameter-free start-state and transition terms dropped:
///
///   L = sum_i [ u_i^T f~_{D_i} - sum_s p0(s) V_soft(s; u_i) ],  u_i = beta_i (theta + epsilon_i).
///
/// For a deterministic MDP with a single start state and trajectories that end
/// in a terminal state this is exactly the mean of sum_t gamma^t log pi_i(a_t|s_t)
/// up to a constant; in general it is that quantity with start-state and
/// transition noise averaged out. Its gradients are the closed forms returned
/// by irleed_gradients.
double log_likelihood(const IrleedEstimate& estimate, const MixedDataset& dataset, const TabularMdp& mdp,
                      const FeatureMap& features, const SoftViOptions& vi = {});

/// Same objective from given per-demonstrator feature expectations.
double log_likelihood_from_expectations(const IrleedEstimate& estimate, const std::vector<Vec>& empirical,
                                        const TabularMdp& mdp, const FeatureMap& features,
                                        const SoftViOptions& vi = {});

/// Per-step action log-likelihood sum_i mean_{tau in D_i} sum_t w_t log pi_i(a_t|s_t),
/// with w_t = 1, or w_t = gamma^t when `discounted` is set.
double action_log_likelihood(const IrleedEstimate& estimate, const MixedDataset& dataset, const TabularMdp& mdp,
                             const FeatureMap& features, const SoftViOptions& vi = {}, bool discounted = false);

/// With Delta_i = f~_{D_i} - f-bar(pi_{theta, eps_i, beta_i}):
///   d/dtheta = sum_i beta_i Delta_i,  d/deps_i = beta_i Delta_i,  d/dbeta_i = (theta + eps_i)^T Delta_i.
IrleedGradients irleed_gradients(const IrleedEstimate& estimate, const MixedDataset& dataset, const TabularMdp& mdp,
                                 const FeatureMap& features, const ExpectationConfig& expectation, Rng& rng,
                                 const SoftViOptions& vi = {});

IrleedGradients irleed_gradients_from_expectations(const IrleedEstimate& estimate, const std::vector<Vec>& empirical,
                                                   const TabularMdp& mdp, const FeatureMap& features,
                                                   const ExpectationConfig& expectation, Rng& rng,
                                                   const SoftViOptions& vi = {});

/// Alternating schedule, repeated outer_iterations times:
///   A) gradient ascent on theta (epsilon, beta held) until
///      lr_theta * |grad|_inf <= tol;
///   B) eps_beta_steps joint ascent steps on every epsilon_i and beta_i, with
///      beta_i projected onto [0, inf).
/// With epsilon and beta both frozen, phase B is empty and one theta phase is run.
IrleedEstimate train_irleed(const MixedDataset& dataset, const TabularMdp& mdp, const FeatureMap& features,
                            const IrleedConfig& config, Rng& rng);

/// Soft policy under the shared weights alone.
SoftSolution recover_policy(const IrleedEstimate& estimate, const TabularMdp& mdp, const FeatureMap& features,
                            const SoftViOptions& vi = {});

struct TrajectoryProbability {
  Trajectory trajectory;
  double probability = 0.0;
};

/// Brute-force trajectory distribution of a deterministic MDP: every
/// trajectory from each start state (cut at a terminal step or after `horizon`
/// steps) gets probability p0(s0) exp(u^T f(tau)) / Z(s0), where
/// f(tau) = sum over its steps of f(s, a). Rejects stochastic MDPs and
/// enumerations above 1e6 trajectories.
std::vector<TrajectoryProbability> trajectory_distribution_oracle(const TabularMdp& mdp, const FeatureMap& features,
                                                                  const Vec& u, int horizon);

nlohmann::json estimate_to_json(const IrleedEstimate& estimate);
IrleedEstimate estimate_from_json(const nlohmann::json& doc);

}  // namespace irleed
