#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "irleed/irleed.hpp"
#include "irleed/mdp.hpp"
#include "irleed/rollout.hpp"
#include "irleed/softrl.hpp"

namespace testsupport {

using irleed::FeatureMap;
using irleed::Mat;
using irleed::Rng;
using irleed::TabularMdp;
using irleed::Vec;

inline double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * rng.uniform(); }
inline int uniform_int(Rng& rng, int lo, int hi) { return lo + static_cast<int>(rng.uniform() * (hi - lo + 1)); }

/// Random stochastic MDP. Terminal states get self-loops; p0 avoids terminals.
inline TabularMdp random_mdp(Rng& rng, int n_states, int n_actions, int n_terminal = 0, bool deterministic = false,
                             double gamma = 0.9) {
  TabularMdp mdp;
  mdp.n_states = n_states;
  mdp.n_actions = n_actions;
  mdp.gamma = gamma;
  mdp.max_horizon = 60;
  for (int t = 0; t < n_terminal; ++t) mdp.terminal.push_back(n_states - 1 - t);
  mdp.transition.assign(n_actions, Mat::Zero(n_states, n_states));
  for (int a = 0; a < n_actions; ++a) {
    for (int s = 0; s < n_states; ++s) {
      if (mdp.is_terminal(s)) {
        mdp.transition[a](s, s) = 1.0;
      } else if (deterministic) {
        mdp.transition[a](s, uniform_int(rng, 0, n_states - 1)) = 1.0;
      } else {
        double total = 0.0;
        for (int s2 = 0; s2 < n_states; ++s2) {
          const double w = rng.uniform() < 0.3 ? 0.0 : uniform(rng, 0.05, 1.0);
          mdp.transition[a](s, s2) = w;
          total += w;
        }
        if (total == 0.0) {
          mdp.transition[a](s, s) = 1.0;
          total = 1.0;
        }
        mdp.transition[a].row(s) /= total;
      }
    }
  }
  mdp.p0 = Vec::Zero(n_states);
  const int n_start = n_states - n_terminal;
  double total = 0.0;
  for (int s = 0; s < n_start; ++s) total += (mdp.p0(s) = uniform(rng, 0.1, 1.0));
  mdp.p0 /= total;
  return mdp;
}

inline FeatureMap random_features(Rng& rng, int n_states, int n_actions, int k) {
  Mat rows(n_states * n_actions, k);
  for (Eigen::Index i = 0; i < rows.size(); ++i) rows.data()[i] = uniform(rng, -1.0, 1.0);
  return FeatureMap(n_states, n_actions, rows);
}

inline Vec random_vec(Rng& rng, int k, double scale = 1.0) {
  Vec v(k);
  for (int i = 0; i < k; ++i) v(i) = uniform(rng, -scale, scale);
  return v;
}

/// Deterministic chain 0 -> 1 -> ... -> n-1 where every action advances; the last state is terminal.
inline TabularMdp advance_chain(int n_states, int n_actions, double gamma = 0.9, int max_horizon = 100) {
  TabularMdp mdp;
  mdp.n_states = n_states;
  mdp.n_actions = n_actions;
  mdp.gamma = gamma;
  mdp.max_horizon = max_horizon;
  mdp.terminal = {n_states - 1};
  mdp.transition.assign(n_actions, Mat::Zero(n_states, n_states));
  for (int a = 0; a < n_actions; ++a)
    for (int s = 0; s < n_states; ++s) mdp.transition[a](s, std::min(s + 1, n_states - 1)) = 1.0;
  mdp.p0 = Vec::Zero(n_states);
  mdp.p0(0) = 1.0;
  return mdp;
}

/// Deterministic chain where action 0 advances and action 1 stays put; last state terminal.
inline TabularMdp advance_or_stay_chain(int n_states, double gamma = 0.9) {
  TabularMdp mdp = advance_chain(n_states, 2, gamma);
  mdp.transition[1] = Mat::Identity(n_states, n_states);
  return mdp;
}

/// Soft value iteration written with plain loops; same terminal convention as the library.
struct OracleSoft {
  std::vector<std::vector<double>> q;
  std::vector<double> v;
  std::vector<std::vector<double>> policy;
};

inline OracleSoft oracle_soft_vi(const TabularMdp& mdp, const FeatureMap& features, const Vec& u,
                                 double tol = 1e-14, int max_iters = 200000) {
  const int S = mdp.n_states;
  const int A = mdp.n_actions;
  const double tail = std::log(static_cast<double>(A)) / (1.0 - mdp.gamma);
  auto reward = [&](int s, int a) {
    double r = 0.0;
    for (int j = 0; j < features.dim(); ++j) r += u(j) * features.rows()(s * A + a, j);
    return r;
  };
  OracleSoft out;
  out.v.assign(S, 0.0);
  out.q.assign(S, std::vector<double>(A, 0.0));
  for (int it = 0; it < max_iters; ++it) {
    for (int s = 0; s < S; ++s)
      for (int a = 0; a < A; ++a) {
        double cont = 0.0;
        if (mdp.is_terminal(s)) {
          cont = tail;
        } else {
          for (int s2 = 0; s2 < S; ++s2) cont += mdp.prob(s, a, s2) * out.v[s2];
        }
        out.q[s][a] = reward(s, a) + mdp.gamma * cont;
      }
    double change = 0.0;
    for (int s = 0; s < S; ++s) {
      const double m = *std::max_element(out.q[s].begin(), out.q[s].end());
      double z = 0.0;
      for (double qa : out.q[s]) z += std::exp(qa - m);
      const double next = m + std::log(z);
      change = std::max(change, std::abs(next - out.v[s]));
      out.v[s] = next;
    }
    if (change <= tol) break;
  }
  out.policy.assign(S, std::vector<double>(A, 0.0));
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a) out.policy[s][a] = std::exp(out.q[s][a] - out.v[s]);
  return out;
}

inline Mat to_mat(const std::vector<std::vector<double>>& rows) {
  Mat m(rows.size(), rows.empty() ? 0 : rows[0].size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j];
  return m;
}

/// Feature expectation by propagating the state distribution forward step by
/// step; mass that has taken its terminal step is dropped.
inline Vec oracle_feature_expectation(const TabularMdp& mdp, const FeatureMap& features, const Mat& policy,
                                      int steps = 2000) {
  const int S = mdp.n_states;
  const int A = mdp.n_actions;
  std::vector<double> dist(mdp.p0.data(), mdp.p0.data() + S);
  Vec out = Vec::Zero(features.dim());
  double discount = 1.0;
  for (int t = 0; t < steps && discount > 1e-300; ++t) {
    std::vector<double> next(S, 0.0);
    for (int s = 0; s < S; ++s) {
      if (dist[s] == 0.0) continue;
      for (int a = 0; a < A; ++a) {
        const double mass = dist[s] * policy(s, a);
        out += discount * mass * features.row(s, a).transpose();
        if (mdp.is_terminal(s)) continue;
        for (int s2 = 0; s2 < S; ++s2) next[s2] += mass * mdp.prob(s, a, s2);
      }
    }
    dist.swap(next);
    discount *= mdp.gamma;
  }
  return out;
}

/// Exact demonstrator feature expectations (population limit) for each set of parameters.
inline std::vector<Vec> population_expectations(const TabularMdp& mdp, const FeatureMap& features,
                                                const Vec& theta, const std::vector<Vec>& epsilons,
                                                const std::vector<double>& betas) {
  std::vector<Vec> out;
  for (std::size_t i = 0; i < betas.size(); ++i) {
    const auto sol = oracle_soft_vi(mdp, features, betas[i] * (theta + epsilons[i]));
    out.push_back(oracle_feature_expectation(mdp, features, to_mat(sol.policy)));
  }
  return out;
}

/// Central differences of f at x, one coordinate at a time.
inline Vec central_difference(const std::function<double(const Vec&)>& f, const Vec& x, double h = 1e-5) {
  Vec g(x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    Vec plus = x;
    Vec minus = x;
    plus(j) += h;
    minus(j) -= h;
    g(j) = (f(plus) - f(minus)) / (2.0 * h);
  }
  return g;
}

inline double relative_error(const Vec& a, const Vec& b) {
  const double scale = std::max({1.0, a.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff()});
  return (a - b).cwiseAbs().maxCoeff() / scale;
}

}  // namespace testsupport
