#include "irleed/irleed.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace irleed {

namespace {

void check_estimate(const IrleedEstimate& estimate, int n_sets, int k) {
  if (estimate.theta.size() != k) {
    std::ostringstream os;
    os << "theta has length " << estimate.theta.size() << " but feature dimension is " << k;
    throw std::invalid_argument(os.str());
  }
  if (estimate.n_demonstrators() != n_sets || static_cast<int>(estimate.epsilons.size()) != n_sets) {
    std::ostringstream os;
    os << "estimate models " << estimate.n_demonstrators() << " demonstrators but the dataset has " << n_sets;
    throw std::invalid_argument(os.str());
  }
  for (int i = 0; i < n_sets; ++i)
    if (estimate.epsilons[i].size() != k) throw std::invalid_argument("epsilon length differs from feature dimension");
}

Vec to_vec(const std::vector<double>& v) { return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size())); }
std::vector<double> to_std(const Vec& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

void IrleedConfig::validate() const {
  if (!(lr_theta > 0.0 && lr_epsilon > 0.0 && lr_beta > 0.0)) throw std::invalid_argument("learning rates must be positive");
  if (!(tol > 0.0)) throw std::invalid_argument("tol must be positive");
  if (outer_iterations < 1) throw std::invalid_argument("outer_iterations must be at least 1");
  if (eps_beta_steps < 0) throw std::invalid_argument("eps_beta_steps must be non-negative");
  if (max_theta_steps < 1) throw std::invalid_argument("max_theta_steps must be at least 1");
  if (beta_init < 0.0) throw std::invalid_argument("beta_init must be non-negative");
  if (epsilon_l2 < 0.0) throw std::invalid_argument("epsilon_l2 must be non-negative");
}

IrleedEstimate initial_estimate(const IrleedConfig& config, int k, int n_demonstrators) {
  IrleedEstimate est;
  if (config.theta_init.size() == 0) {
    est.theta = Vec::Constant(k, config.theta_init_value);
  } else if (config.theta_init.size() == k) {
    est.theta = config.theta_init;
  } else {
    throw std::invalid_argument("theta_init length differs from feature dimension");
  }
  est.epsilons.assign(n_demonstrators, Vec::Zero(k));
  est.betas.assign(n_demonstrators, config.beta_init);
  return est;
}

std::vector<Vec> demonstrator_feature_expectations(const MixedDataset& dataset, const FeatureMap& features,
                                                   double gamma) {
  std::vector<Vec> out;
  out.reserve(dataset.sets.size());
  for (const auto& set : dataset.sets) out.push_back(empirical_feature_expectation(set.trajectories, features, gamma));
  return out;
}

double log_likelihood_from_expectations(const IrleedEstimate& estimate, const std::vector<Vec>& empirical,
                                        const TabularMdp& mdp, const FeatureMap& features, const SoftViOptions& vi) {
  check_estimate(estimate, static_cast<int>(empirical.size()), features.dim());
  double total = 0.0;
  for (int i = 0; i < estimate.n_demonstrators(); ++i) {
    const Vec u = estimate.betas[i] * estimate.perceived_weights(i);
    const auto sol = soft_value_iteration(mdp, features, u, vi);
    total += u.dot(empirical[i]) - mdp.p0.dot(sol.v);
  }
  return total;
}

double log_likelihood(const IrleedEstimate& estimate, const MixedDataset& dataset, const TabularMdp& mdp,
                      const FeatureMap& features, const SoftViOptions& vi) {
  dataset.validate();
  return log_likelihood_from_expectations(estimate, demonstrator_feature_expectations(dataset, features, mdp.gamma),
                                          mdp, features, vi);
}

double action_log_likelihood(const IrleedEstimate& estimate, const MixedDataset& dataset, const TabularMdp& mdp,
                             const FeatureMap& features, const SoftViOptions& vi, bool discounted) {
  dataset.validate();
  check_estimate(estimate, dataset.n_demonstrators(), features.dim());
  double total = 0.0;
  for (int i = 0; i < dataset.n_demonstrators(); ++i) {
    const auto sol =
        demonstrator_policy(mdp, features, estimate.theta, estimate.epsilons[i], estimate.betas[i], vi);
    const Mat log_pi = sol.q.colwise() - sol.v;
    double sum = 0.0;
    for (const auto& traj : dataset.sets[i].trajectories) {
      double w = 1.0;
      for (std::size_t t = 0; t < traj.size(); ++t) {
        sum += w * log_pi(traj.states[t], traj.actions[t]);
        if (discounted) w *= mdp.gamma;
      }
    }
    total += sum / static_cast<double>(dataset.sets[i].trajectories.size());
  }
  return total;
}

IrleedGradients irleed_gradients_from_expectations(const IrleedEstimate& estimate, const std::vector<Vec>& empirical,
                                                   const TabularMdp& mdp, const FeatureMap& features,
                                                   const ExpectationConfig& expectation, Rng& rng,
                                                   const SoftViOptions& vi) {
  const int n = static_cast<int>(empirical.size());
  check_estimate(estimate, n, features.dim());
  IrleedGradients g;
  g.theta = Vec::Zero(features.dim());
  g.epsilons.reserve(n);
  g.betas.reserve(n);
  g.residuals.reserve(n);
  for (int i = 0; i < n; ++i) {
    const auto sol =
        demonstrator_policy(mdp, features, estimate.theta, estimate.epsilons[i], estimate.betas[i], vi);
    Vec residual = empirical[i] - model_feature_expectation(mdp, features, sol.policy, expectation, rng);
    g.theta += estimate.betas[i] * residual;
    g.epsilons.push_back(estimate.betas[i] * residual);
    g.betas.push_back(estimate.perceived_weights(i).dot(residual));
    g.residuals.push_back(std::move(residual));
  }
  return g;
}

IrleedGradients irleed_gradients(const IrleedEstimate& estimate, const MixedDataset& dataset, const TabularMdp& mdp,
                                 const FeatureMap& features, const ExpectationConfig& expectation, Rng& rng,
                                 const SoftViOptions& vi) {
  dataset.validate();
  return irleed_gradients_from_expectations(
      estimate, demonstrator_feature_expectations(dataset, features, mdp.gamma), mdp, features, expectation, rng, vi);
}

IrleedEstimate train_irleed(const MixedDataset& dataset, const TabularMdp& mdp, const FeatureMap& features,
                            const IrleedConfig& config, Rng& rng) {
  config.validate();
  dataset.validate();
  const int n = dataset.n_demonstrators();
  const auto empirical = demonstrator_feature_expectations(dataset, features, mdp.gamma);
  IrleedEstimate est = initial_estimate(config, features.dim(), n);
  if (config.record_theta_history) est.theta_history.push_back(est.theta);
  const double slack_one = objective_slack(mdp, config.vi, 1);

  auto evaluate = [&](int i, const Vec& theta, const Vec& eps, double beta) {
    return evaluate_weights(mdp, features, beta * (theta + eps), empirical[i], config.expectation, rng, config.vi);
  };
  auto penalized = [&](const WeightEvaluation& e, const Vec& eps) {
    return e.objective - config.epsilon_l2 * eps.squaredNorm();
  };
  auto require_finite = [&](const WeightEvaluation& e, int i, const char* phase, int outer, int step) {
    if (e.residual.allFinite() && std::isfinite(e.objective)) return;
    std::ostringstream os;
    os << "non-finite gradient in phase " << phase << " (outer " << outer << ", step " << step
       << ") for demonstrator " << dataset.sets[i].id;
    throw std::runtime_error(os.str());
  };

  std::vector<WeightEvaluation> current(n);
  for (int i = 0; i < n; ++i) current[i] = evaluate(i, est.theta, est.epsilons[i], est.betas[i]);

  const bool phase_b_active = config.eps_beta_steps > 0 && !(config.freeze_epsilon && config.freeze_beta);
  const int outer_iterations = phase_b_active ? config.outer_iterations : 1;

  for (int outer = 1; outer <= outer_iterations; ++outer) {
    bool phase_converged = false;
    double lr = config.lr_theta;
    for (int step = 1; step <= config.max_theta_steps; ++step) {
      Vec grad = Vec::Zero(features.dim());
      double objective = 0.0;
      for (int i = 0; i < n; ++i) {
        require_finite(current[i], i, "theta", outer, step);
        grad += est.betas[i] * current[i].residual;
        objective += current[i].objective;
      }
      const double grad_norm = grad.cwiseAbs().maxCoeff();
      Vec proposal = est.theta + lr * grad;
      std::vector<WeightEvaluation> next(n);
      double next_objective = 0.0;
      for (int i = 0; i < n; ++i) {
        next[i] = evaluate(i, proposal, est.epsilons[i], est.betas[i]);
        next_objective += next[i].objective;
      }
      if (config.monotone_safeguard && next_objective < objective - slack_one * n) {
        lr *= 0.5;
        ++est.rejected_steps;
        est.trace.push_back({"theta", outer, step, grad_norm, 0.0, est.theta.norm()});
        continue;
      }
      const double theta_delta = (proposal - est.theta).cwiseAbs().maxCoeff();
      est.theta = std::move(proposal);
      current = std::move(next);
      est.trace.push_back({"theta", outer, step, grad_norm, theta_delta, est.theta.norm()});
      if (config.record_theta_history) est.theta_history.push_back(est.theta);
      if (config.lr_theta * grad_norm <= config.tol) {
        phase_converged = true;
        break;
      }
    }
    if (!phase_converged) est.converged = false;
    if (!phase_b_active) continue;

    std::vector<double> scale(n, 1.0);
    for (int step = 1; step <= config.eps_beta_steps; ++step) {
      double grad_norm = 0.0;
      for (int i = 0; i < n; ++i) {
        require_finite(current[i], i, "eps_beta", outer, step);
        const Vec& residual = current[i].residual;
        Vec eps = est.epsilons[i];
        double beta = est.betas[i];
        if (!config.freeze_epsilon) {
          const Vec grad_eps = est.betas[i] * residual - 2.0 * config.epsilon_l2 * est.epsilons[i];
          eps += scale[i] * config.lr_epsilon * grad_eps;
          grad_norm = std::max(grad_norm, grad_eps.cwiseAbs().maxCoeff());
        }
        if (!config.freeze_beta) {
          const double grad_beta = est.perceived_weights(i).dot(residual);
          beta = std::max(0.0, beta + scale[i] * config.lr_beta * grad_beta);
          grad_norm = std::max(grad_norm, std::abs(grad_beta));
        }
        auto next = evaluate(i, est.theta, eps, beta);
        if (config.monotone_safeguard &&
            penalized(next, eps) < penalized(current[i], est.epsilons[i]) - slack_one) {
          scale[i] *= 0.5;
          ++est.rejected_steps;
          continue;
        }
        est.epsilons[i] = std::move(eps);
        est.betas[i] = beta;
        current[i] = std::move(next);
      }
      est.trace.push_back({"eps_beta", outer, step, grad_norm, 0.0, est.theta.norm()});
    }
  }
  return est;
}

SoftSolution recover_policy(const IrleedEstimate& estimate, const TabularMdp& mdp, const FeatureMap& features,
                            const SoftViOptions& vi) {
  return soft_value_iteration(mdp, features, estimate.theta, vi);
}

std::vector<TrajectoryProbability> trajectory_distribution_oracle(const TabularMdp& mdp, const FeatureMap& features,
                                                                  const Vec& u, int horizon) {
  if (!mdp.is_deterministic()) throw std::invalid_argument("trajectory oracle needs deterministic dynamics");
  if (horizon < 1) throw std::invalid_argument("horizon must be at least 1");
  if (u.size() != features.dim()) throw std::invalid_argument("u length differs from feature dimension");
  constexpr std::size_t kMaxTrajectories = 1'000'000;

  const Mat r = features.reward(u);
  auto successor = [&](int s, int a) {
    int next = -1;
    mdp.transition[a].row(s).maxCoeff(&next);
    return next;
  };

  std::vector<TrajectoryProbability> out;
  for (int s0 = 0; s0 < mdp.n_states; ++s0) {
    if (mdp.p0(s0) <= 0.0) continue;
    const std::size_t first = out.size();
    std::vector<double> scores;
    Trajectory current;
    std::function<void(int, double)> expand = [&](int s, double score) {
      for (int a = 0; a < mdp.n_actions; ++a) {
        current.states.push_back(s);
        current.actions.push_back(a);
        const double next_score = score + r(s, a);
        if (mdp.is_terminal(s) || static_cast<int>(current.size()) == horizon) {
          if (out.size() >= kMaxTrajectories) throw std::invalid_argument("trajectory enumeration exceeds 1e6");
          out.push_back({current, 0.0});
          scores.push_back(next_score);
        } else {
          expand(successor(s, a), next_score);
        }
        current.states.pop_back();
        current.actions.pop_back();
      }
    };
    expand(s0, 0.0);

    double max_score = -std::numeric_limits<double>::infinity();
    for (double sc : scores) max_score = std::max(max_score, sc);
    double z = 0.0;
    for (double sc : scores) z += std::exp(sc - max_score);
    for (std::size_t j = 0; j < scores.size(); ++j)
      out[first + j].probability = mdp.p0(s0) * std::exp(scores[j] - max_score) / z;
  }
  return out;
}

nlohmann::json estimate_to_json(const IrleedEstimate& estimate) {
  nlohmann::json eps = nlohmann::json::array();
  for (const auto& e : estimate.epsilons) eps.push_back(to_std(e));
  nlohmann::json trace = nlohmann::json::array();
  for (const auto& t : estimate.trace)
    trace.push_back({{"phase", t.phase},
                     {"outer", t.outer},
                     {"step", t.step},
                     {"grad_norm", t.grad_norm},
                     {"theta_delta", t.theta_delta},
                     {"theta_norm", t.theta_norm}});
  return {{"theta", to_std(estimate.theta)},
          {"epsilons", eps},
          {"betas", estimate.betas},
          {"converged", estimate.converged},
          {"trace", trace}};
}

IrleedEstimate estimate_from_json(const nlohmann::json& doc) {
  IrleedEstimate est;
  est.theta = to_vec(doc.at("theta").get<std::vector<double>>());
  for (const auto& e : doc.at("epsilons")) est.epsilons.push_back(to_vec(e.get<std::vector<double>>()));
  est.betas = doc.at("betas").get<std::vector<double>>();
  est.converged = doc.value("converged", true);
  if (est.epsilons.size() != est.betas.size()) throw std::invalid_argument("checkpoint epsilons/betas count mismatch");
  for (const auto& e : est.epsilons)
    if (e.size() != est.theta.size()) throw std::invalid_argument("checkpoint epsilon length differs from theta");
  for (double b : est.betas)
    if (b < 0.0) throw std::invalid_argument("checkpoint holds a negative beta");
  if (doc.contains("trace")) {
    for (const auto& t : doc.at("trace"))
      est.trace.push_back({t.at("phase").get<std::string>(), t.at("outer").get<int>(), t.at("step").get<int>(),
                           t.at("grad_norm").get<double>(), t.at("theta_delta").get<double>(),
                           t.at("theta_norm").get<double>()});
  }
  return est;
}

}  // namespace irleed
