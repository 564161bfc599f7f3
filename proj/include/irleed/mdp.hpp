#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace irleed {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Finite MDP with known dynamics.
///
/// `transition[a](s, s2)` is the probability of landing in `s2` after taking
/// action `a` in `s`. A terminal state ends the episode after the step taken
/// in it; its transition rows are kept as self-loops so the tensor stays
/// stochastic.
struct TabularMdp {
  int n_states = 0;
  int n_actions = 0;
  std::vector<Mat> transition;
  Vec p0;
  double gamma = 0.9;
  std::vector<int> terminal;
  int max_horizon = 100;

  bool is_terminal(int s) const;
  double prob(int s, int a, int s2) const { return transition[a](s, s2); }
  bool is_deterministic() const;
};

struct Violation {
  std::string kind;  // "transition_row", "p0_negative", ...
  int state = -1;
  int action = -1;
  std::string message;
};

/// Checks every TabularMdp invariant and returns all violations found.
std::vector<Violation> validate_mdp(const TabularMdp& mdp);

/// Throws std::invalid_argument listing the violations, if any.
void require_valid(const TabularMdp& mdp);

/// Per-(state, action) features stored row-wise: row `s * n_actions + a`.
class FeatureMap {
 public:
  FeatureMap() = default;
  FeatureMap(int n_states, int n_actions, Mat rows);

  /// f(s, a) = e_s, the Gridworld encoding.
  static FeatureMap one_hot_states(int n_states, int n_actions);
  /// f(s, a) = e_{s * n_actions + a}.
  static FeatureMap one_hot_state_actions(int n_states, int n_actions);

  int dim() const { return static_cast<int>(rows_.cols()); }
  int n_states() const { return n_states_; }
  int n_actions() const { return n_actions_; }
  auto row(int s, int a) const { return rows_.row(s * n_actions_ + a); }
  const Mat& rows() const { return rows_; }

  /// r(s, a) = w^T f(s, a) as an [s][a] matrix.
  Mat reward(const Vec& weights) const;
  /// Same map with every feature multiplied by `c`.
  FeatureMap scaled(double c) const;
  /// True when f(s, a) is identical for all actions of every state.
  bool state_only() const;

 private:
  int n_states_ = 0;
  int n_actions_ = 0;
  Mat rows_;
};

enum class GridAction : int { Up = 0, Down = 1, Left = 2, Right = 3 };

struct GridworldSpec {
  int width = 5;
  int height = 5;
  std::vector<int> goal_states;  // empty selects top-left, top-right, bottom-right
  double goal_reward = 1.0;
  double step_reward = 0.0;
  /// Probability that a move is replaced by a uniformly random action. Off by default.
  double slip = 0.0;

  int index(int row, int col) const { return row * width + col; }
  std::vector<int> corners() const;
  std::vector<int> resolved_goals() const;
};

struct Gridworld {
  TabularMdp mdp;
  FeatureMap features;
  Vec true_theta;
};

Gridworld build_gridworld(const GridworldSpec& spec, double gamma, int max_horizon);

/// States reachable from the support of p0 within `horizon` transitions.
std::vector<bool> reachable_within(const TabularMdp& mdp, int horizon);

nlohmann::json mdp_to_json(const TabularMdp& mdp);
TabularMdp mdp_from_json(const nlohmann::json& doc);

nlohmann::json gridworld_spec_to_json(const GridworldSpec& spec);
GridworldSpec gridworld_spec_from_json(const nlohmann::json& doc);

}  // namespace irleed
