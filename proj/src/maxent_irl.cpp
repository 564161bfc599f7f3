#include "irleed/maxent_irl.hpp"

#include <limits>
#include <sstream>
#include <stdexcept>

namespace irleed {

Vec model_feature_expectation(const TabularMdp& mdp, const FeatureMap& features, const Mat& policy,
                              const ExpectationConfig& expectation, Rng& rng) {
  if (expectation.mode == ExpectationMode::Exact) return exact_feature_expectation(mdp, features, policy);
  return mc_feature_expectation(mdp, features, policy, expectation.n_episodes, rng);
}

WeightEvaluation evaluate_weights(const TabularMdp& mdp, const FeatureMap& features, const Vec& u,
                                  const Vec& empirical, const ExpectationConfig& expectation, Rng& rng,
                                  const SoftViOptions& vi) {
  WeightEvaluation out;
  out.solution = soft_value_iteration(mdp, features, u, vi);
  out.objective = u.dot(empirical) - mdp.p0.dot(out.solution.v);
  out.residual = empirical - model_feature_expectation(mdp, features, out.solution.policy, expectation, rng);
  return out;
}

double objective_slack(const TabularMdp& mdp, const SoftViOptions& vi, int n_solves) {
  return 2.0 * n_solves * mdp.gamma * vi.tol / (1.0 - mdp.gamma) + 1e-9;
}

void IrlConfig::validate() const {
  if (!(lr_theta > 0.0)) throw std::invalid_argument("lr_theta must be positive");
  if (!(tol_theta > 0.0)) throw std::invalid_argument("tol_theta must be positive");
  if (max_outer_steps < 1) throw std::invalid_argument("max_outer_steps must be at least 1");
  if (expectation.mode == ExpectationMode::MonteCarlo && expectation.n_episodes < 1)
    throw std::invalid_argument("Monte-Carlo expectation needs at least one episode");
}

Vec IrlConfig::initial_theta(int k) const {
  if (theta_init.size() == 0) return Vec::Constant(k, theta_init_value);
  if (theta_init.size() != k) {
    std::ostringstream os;
    os << "theta_init has length " << theta_init.size() << " but feature dimension is " << k;
    throw std::invalid_argument(os.str());
  }
  return theta_init;
}

Vec irl_gradient(const Vec& theta, const std::vector<Trajectory>& pooled, const TabularMdp& mdp,
                 const FeatureMap& features, const IrlConfig& config, Rng& rng) {
  if (theta.size() != features.dim()) throw std::invalid_argument("theta length differs from feature dimension");
  const Vec empirical = empirical_feature_expectation(pooled, features, mdp.gamma);
  return evaluate_weights(mdp, features, theta, empirical, config.expectation, rng, config.vi).residual;
}

IrlResult train_irl(const std::vector<Trajectory>& pooled, const TabularMdp& mdp, const FeatureMap& features,
                    const IrlConfig& config, Rng& rng) {
  config.validate();
  return train_irl_from_expectation(empirical_feature_expectation(pooled, features, mdp.gamma), mdp, features, config,
                                    rng);
}

IrlResult train_irl_from_expectation(const Vec& empirical, const TabularMdp& mdp, const FeatureMap& features,
                                     const IrlConfig& config, Rng& rng) {
  config.validate();
  if (empirical.size() != features.dim())
    throw std::invalid_argument("empirical feature expectation length differs from feature dimension");
  const double slack = objective_slack(mdp, config.vi, 1);

  IrlResult result;
  Vec theta = config.initial_theta(features.dim());
  if (config.record_theta_history) result.theta_history.push_back(theta);
  auto current = evaluate_weights(mdp, features, theta, empirical, config.expectation, rng, config.vi);
  Vec best_theta = theta;
  double best_grad = std::numeric_limits<double>::infinity();
  double lr = config.lr_theta;

  for (int step = 1; step <= config.max_outer_steps; ++step) {
    const Vec& grad = current.residual;
    if (!grad.allFinite()) {
      std::ostringstream os;
      os << "IRL gradient became non-finite at step " << step;
      throw std::runtime_error(os.str());
    }
    const double grad_norm = grad.cwiseAbs().maxCoeff();
    if (grad_norm < best_grad) {
      best_grad = grad_norm;
      best_theta = theta;
    }

    Vec proposal = theta + lr * grad;
    auto next = evaluate_weights(mdp, features, proposal, empirical, config.expectation, rng, config.vi);
    if (config.monotone_safeguard && next.objective < current.objective - slack) {
      lr *= 0.5;
      ++result.rejected_steps;
      result.trace.push_back({"irl", 0, step, grad_norm, 0.0, theta.norm()});
      continue;
    }
    const double theta_delta = (proposal - theta).cwiseAbs().maxCoeff();
    theta = std::move(proposal);
    current = std::move(next);
    if (config.record_theta_history) result.theta_history.push_back(theta);
    result.trace.push_back({"irl", 0, step, grad_norm, theta_delta, theta.norm()});
    result.steps = step;
    if (config.lr_theta * grad_norm <= config.tol_theta) {
      result.converged = true;
      break;
    }
  }
  result.final_lr = lr;
  result.theta = result.converged ? theta : best_theta;
  result.solution = soft_value_iteration(mdp, features, result.theta, config.vi);
  return result;
}

}  // namespace irleed
