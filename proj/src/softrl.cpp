#include "irleed/softrl.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace irleed {

namespace {

void check_features(const TabularMdp& mdp, const FeatureMap& features) {
  if (features.n_states() != mdp.n_states || features.n_actions() != mdp.n_actions) {
    std::ostringstream os;
    os << "feature map covers " << features.n_states() << "x" << features.n_actions()
       << " state-actions but the MDP has " << mdp.n_states << "x" << mdp.n_actions;
    throw std::invalid_argument(os.str());
  }
}

void check_policy(const TabularMdp& mdp, const Mat& policy) {
  if (policy.rows() != mdp.n_states || policy.cols() != mdp.n_actions) {
    std::ostringstream os;
    os << "policy is " << policy.rows() << "x" << policy.cols() << ", expected " << mdp.n_states << "x"
       << mdp.n_actions;
    throw std::invalid_argument(os.str());
  }
}

// Row-wise log-sum-exp, shifted by the row max.
Vec log_sum_exp_rows(const Mat& q) {
  const Vec m = q.rowwise().maxCoeff();
  return m.array() + (q.colwise() - m).array().exp().rowwise().sum().log();
}

}  // namespace

double post_terminal_value(const TabularMdp& mdp) {
  return std::log(static_cast<double>(mdp.n_actions)) / (1.0 - mdp.gamma);
}

SoftSolution soft_value_iteration(const TabularMdp& mdp, const FeatureMap& features, const Vec& reward_weights,
                                  const SoftViOptions& options) {
  check_features(mdp, features);
  if (!(options.tol > 0.0)) throw std::invalid_argument("soft value iteration tolerance must be positive");
  const Mat r = features.reward(reward_weights);

  const int S = mdp.n_states;
  const int A = mdp.n_actions;
  std::vector<char> terminal(S, 0);
  for (int s : mdp.terminal) terminal[s] = 1;
  const double after_terminal = post_terminal_value(mdp);

  SoftSolution sol;
  sol.v = Vec::Constant(S, after_terminal);
  sol.q = Mat::Zero(S, A);
  Vec next_v(S);
  Vec continuation(S);
  for (int it = 1; it <= options.max_iters; ++it) {
    for (int a = 0; a < A; ++a) {
      continuation.noalias() = mdp.transition[a] * sol.v;
      for (int s = 0; s < S; ++s) sol.q(s, a) = r(s, a) + mdp.gamma * (terminal[s] ? after_terminal : continuation(s));
    }
    next_v = log_sum_exp_rows(sol.q);
    sol.residual = (next_v - sol.v).cwiseAbs().maxCoeff();
    sol.v.swap(next_v);
    sol.iterations = it;
    if (sol.residual <= options.tol) {
      sol.converged = true;
      break;
    }
  }
  // Action values within rounding of the row maximum count as ties.
  constexpr double kTieUlps = 16.0 * std::numeric_limits<double>::epsilon();
  sol.policy.resize(S, A);
  for (int s = 0; s < S; ++s) {
    const double m = sol.q.row(s).maxCoeff();
    const double tie = kTieUlps * std::max(1.0, std::abs(m));
    for (int a = 0; a < A; ++a) {
      const double gap = sol.q(s, a) - m;
      sol.policy(s, a) = gap >= -tie ? 1.0 : std::exp(gap);
    }
    sol.policy.row(s) /= sol.policy.row(s).sum();
  }
  return sol;
}

SoftSolution demonstrator_policy(const TabularMdp& mdp, const FeatureMap& features, const Vec& theta,
                                 const Vec& epsilon, double beta, const SoftViOptions& options) {
  if (beta < 0.0) throw std::invalid_argument("demonstrator precision beta must be non-negative");
  if (theta.size() != epsilon.size()) throw std::invalid_argument("theta and epsilon lengths differ");
  return soft_value_iteration(mdp, features, beta * (theta + epsilon), options);
}

Vec state_visitation(const TabularMdp& mdp, const Mat& policy) {
  check_policy(mdp, policy);
  const int S = mdp.n_states;
  Mat p_pi = Mat::Zero(S, S);
  for (int s = 0; s < S; ++s) {
    if (mdp.is_terminal(s)) continue;
    for (int a = 0; a < mdp.n_actions; ++a) p_pi.row(s) += policy(s, a) * mdp.transition[a].row(s);
  }
  // d = p0 + gamma P_pi^T d
  const Mat system = Mat::Identity(S, S) - mdp.gamma * p_pi.transpose();
  return system.partialPivLu().solve(mdp.p0);
}

Mat state_action_occupancy(const TabularMdp& mdp, const Mat& policy) {
  const Vec d = state_visitation(mdp, policy);
  return policy.array().colwise() * d.array();
}

Vec exact_feature_expectation(const TabularMdp& mdp, const FeatureMap& features, const Mat& policy) {
  check_features(mdp, features);
  const Mat rho = state_action_occupancy(mdp, policy);
  Vec out = Vec::Zero(features.dim());
  for (int s = 0; s < mdp.n_states; ++s)
    for (int a = 0; a < mdp.n_actions; ++a)
      if (rho(s, a) != 0.0) out += rho(s, a) * features.row(s, a).transpose();
  return out;
}

nlohmann::json soft_solution_to_json(const SoftSolution& sol) {
  auto matrix = [](const Mat& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      std::vector<double> row(m.cols());
      for (Eigen::Index j = 0; j < m.cols(); ++j) row[j] = m(i, j);
      rows.push_back(row);
    }
    return rows;
  };
  return {{"q", matrix(sol.q)},
          {"v", std::vector<double>(sol.v.data(), sol.v.data() + sol.v.size())},
          {"policy", matrix(sol.policy)},
          {"iterations", sol.iterations},
          {"residual", sol.residual},
          {"converged", sol.converged}};
}

}  // namespace irleed
