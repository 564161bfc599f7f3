#include "irleed/evalx.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace irleed {

namespace {

Vec state_reward(const FeatureMap& features, const Vec& theta) {
  if (!features.state_only()) throw std::invalid_argument("policy evaluation by rollouts needs state-only features");
  return features.reward(theta).col(0);
}

}  // namespace

EvalReport evaluate_policy(const TabularMdp& mdp, const FeatureMap& features, const Mat& policy,
                           const Vec& true_theta, int n_episodes, Rng& rng) {
  const auto stats = mc_return_stats(mdp, policy, state_reward(features, true_theta), n_episodes, rng);
  EvalReport report;
  report.mean_return = stats.mean;
  report.std_error = stats.std_error;
  report.n_episodes = stats.n_episodes;
  report.seed = rng.seed();
  return report;
}

double exact_return(const TabularMdp& mdp, const FeatureMap& features, const Mat& policy, const Vec& theta) {
  return theta.dot(exact_feature_expectation(mdp, features, policy));
}

double bellman_optimal_return(const TabularMdp& mdp, const FeatureMap& features, const Vec& theta, double tol,
                              int max_iters) {
  const Mat r = features.reward(theta);
  Vec v = Vec::Zero(mdp.n_states);
  Mat q(mdp.n_states, mdp.n_actions);
  for (int it = 0; it < max_iters; ++it) {
    for (int a = 0; a < mdp.n_actions; ++a) {
      const Vec next = mdp.transition[a] * v;
      for (int s = 0; s < mdp.n_states; ++s) q(s, a) = r(s, a) + (mdp.is_terminal(s) ? 0.0 : mdp.gamma * next(s));
    }
    const Vec updated = q.rowwise().maxCoeff();
    const double change = (updated - v).cwiseAbs().maxCoeff();
    v = updated;
    if (change <= tol) break;
  }
  return mdp.p0.dot(v);
}

ReturnRange return_range(const TabularMdp& mdp, const FeatureMap& features, const Vec& theta) {
  const Mat r = features.reward(theta);
  return {std::min(0.0, r.minCoeff()) / (1.0 - mdp.gamma), std::max(0.0, r.maxCoeff()) / (1.0 - mdp.gamma)};
}

Improvement relative_improvement(double irleed_return, double irl_return, const ReturnRange& range) {
  if (irleed_return == irl_return) return {0.0, false};
  if (irl_return > 0.0 && irleed_return >= 0.0) return {(irleed_return - irl_return) / std::abs(irl_return), false};
  const double width = range.max - range.min;
  if (!(width > 0.0)) throw std::invalid_argument("return range must have positive width");
  return {(irleed_return - irl_return) / width, true};
}

Improvement relative_improvement(const EvalReport& irleed, const EvalReport& irl, const ReturnRange& range) {
  return relative_improvement(irleed.mean_return, irl.mean_return, range);
}

Prop2Report prop2_check(const TabularMdp& mdp, const FeatureMap& features, const Vec& true_theta,
                        const std::vector<DemonstratorParams>& demonstrators, const Mat& irl_policy,
                        const SoftViOptions& vi) {
  if (demonstrators.empty()) throw std::invalid_argument("prop2_check needs at least one demonstrator");
  Prop2Report report;
  report.lhs = exact_return(mdp, features, irl_policy, true_theta);
  for (const auto& d : demonstrators) {
    const auto sol = demonstrator_policy(mdp, features, true_theta, d.epsilon, d.beta, vi);
    report.demonstrator_returns.push_back(exact_return(mdp, features, sol.policy, true_theta));
  }
  double sum = 0.0;
  for (double r : report.demonstrator_returns) sum += r;
  report.rhs = sum / static_cast<double>(demonstrators.size());
  report.gap = report.lhs - report.rhs;
  report.soft_optimal =
      exact_return(mdp, features, soft_value_iteration(mdp, features, true_theta, vi).policy, true_theta);
  report.bellman_optimal = bellman_optimal_return(mdp, features, true_theta);
  return report;
}

double discounted_causal_entropy(const TabularMdp& mdp, const Mat& policy) {
  const Vec d = state_visitation(mdp, policy);
  double h = 0.0;
  for (int s = 0; s < mdp.n_states; ++s) {
    double hs = 0.0;
    for (int a = 0; a < mdp.n_actions; ++a) {
      const double p = policy(s, a);
      if (p > 0.0) hs -= p * std::log(p);
    }
    h += d(s) * hs;
  }
  return h;
}

Mat reward_grid_export(const Vec& theta, const GridworldSpec& spec) {
  if (theta.size() != static_cast<Eigen::Index>(spec.width) * spec.height) {
    std::ostringstream os;
    os << "theta has length " << theta.size() << " but the grid has " << spec.width * spec.height << " cells";
    throw std::invalid_argument(os.str());
  }
  const double lo = theta.minCoeff();
  const double hi = theta.maxCoeff();
  Mat grid = Mat::Zero(spec.height, spec.width);
  if (hi - lo <= 0.0) return grid;
  for (int row = 0; row < spec.height; ++row)
    for (int col = 0; col < spec.width; ++col) grid(row, col) = (theta(spec.index(row, col)) - lo) / (hi - lo);
  return grid;
}

void write_grid_csv(std::ostream& out, const Mat& grid) {
  std::ostringstream os;
  os.precision(17);
  for (Eigen::Index row = 0; row < grid.rows(); ++row) {
    for (Eigen::Index col = 0; col < grid.cols(); ++col) {
      if (col) os << ',';
      os << grid(row, col);
    }
    os << '\n';
  }
  out << os.str();
}

void write_grid_pgm(std::ostream& out, const Mat& grid) {
  out << "P5\n" << grid.cols() << ' ' << grid.rows() << "\n255\n";
  for (Eigen::Index row = 0; row < grid.rows(); ++row)
    for (Eigen::Index col = 0; col < grid.cols(); ++col) {
      const double v = std::clamp(grid(row, col), 0.0, 1.0);
      out.put(static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * v))));
    }
}

}  // namespace irleed
