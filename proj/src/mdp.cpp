#include "irleed/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <set>
#include <sstream>
#include <stdexcept>

namespace irleed {

namespace {

constexpr double kStochasticTol = 1e-12;

std::string describe(const std::vector<Violation>& violations) {
  std::ostringstream os;
  os << "invalid MDP (" << violations.size() << " violation"
     << (violations.size() == 1 ? "" : "s") << ")";
  for (const auto& v : violations) os << "\n  " << v.kind << ": " << v.message;
  return os.str();
}

}  // namespace

bool TabularMdp::is_terminal(int s) const {
  return std::find(terminal.begin(), terminal.end(), s) != terminal.end();
}

bool TabularMdp::is_deterministic() const {
  for (const auto& t : transition)
    for (Eigen::Index i = 0; i < t.size(); ++i) {
      const double p = t.data()[i];
      if (p != 0.0 && p != 1.0) return false;
    }
  return true;
}

std::vector<Violation> validate_mdp(const TabularMdp& mdp) {
  std::vector<Violation> out;
  auto add = [&](std::string kind, int s, int a, std::string msg) {
    out.push_back({std::move(kind), s, a, std::move(msg)});
  };

  if (mdp.n_states <= 0) add("n_states", -1, -1, "n_states must be positive");
  if (mdp.n_actions <= 0) add("n_actions", -1, -1, "n_actions must be positive");
  if (!(mdp.gamma > 0.0 && mdp.gamma < 1.0)) {
    std::ostringstream os;
    os << "gamma = " << mdp.gamma << " is outside (0, 1)";
    add("gamma", -1, -1, os.str());
  }
  if (mdp.max_horizon <= 0) add("max_horizon", -1, -1, "max_horizon must be positive");
  if (!out.empty() && (mdp.n_states <= 0 || mdp.n_actions <= 0)) return out;

  const int S = mdp.n_states;
  const int A = mdp.n_actions;
  bool shapes_ok = static_cast<int>(mdp.transition.size()) == A;
  if (!shapes_ok) {
    add("transition_shape", -1, -1, "expected one transition matrix per action");
  } else {
    for (int a = 0; a < A; ++a) {
      if (mdp.transition[a].rows() != S || mdp.transition[a].cols() != S) {
        std::ostringstream os;
        os << "transition matrix for action " << a << " is " << mdp.transition[a].rows() << "x"
           << mdp.transition[a].cols() << ", expected " << S << "x" << S;
        add("transition_shape", -1, a, os.str());
        shapes_ok = false;
      }
    }
  }

  for (int s : mdp.terminal) {
    if (s < 0 || s >= S) {
      std::ostringstream os;
      os << "terminal index " << s << " out of range";
      add("terminal_index", s, -1, os.str());
    }
  }

  if (shapes_ok) {
    for (int s = 0; s < S; ++s) {
      for (int a = 0; a < A; ++a) {
        const auto row = mdp.transition[a].row(s);
        const double total = row.sum();
        if (std::abs(total - 1.0) > kStochasticTol) {
          std::ostringstream os;
          os << "row (s=" << s << ", a=" << a << ") sums to " << total;
          add("transition_row", s, a, os.str());
        }
        if ((row.array() < 0.0).any()) {
          std::ostringstream os;
          os << "row (s=" << s << ", a=" << a << ") has a negative entry";
          add("transition_negative", s, a, os.str());
        }
        if (mdp.is_terminal(s) && row(s) != 1.0) {
          std::ostringstream os;
          os << "terminal state " << s << " does not self-loop under action " << a;
          add("terminal_self_loop", s, a, os.str());
        }
      }
    }
  }

  if (mdp.p0.size() != S) {
    add("p0_shape", -1, -1, "p0 length differs from n_states");
  } else {
    for (int s = 0; s < S; ++s) {
      if (mdp.p0(s) < 0.0) {
        std::ostringstream os;
        os << "p0[" << s << "] = " << mdp.p0(s) << " is negative";
        add("p0_negative", s, -1, os.str());
      }
    }
    const double total = mdp.p0.sum();
    if (std::abs(total - 1.0) > kStochasticTol) {
      std::ostringstream os;
      os << "p0 sums to " << total;
      add("p0_sum", -1, -1, os.str());
    }
  }
  return out;
}

void require_valid(const TabularMdp& mdp) {
  auto violations = validate_mdp(mdp);
  if (!violations.empty()) throw std::invalid_argument(describe(violations));
}

FeatureMap::FeatureMap(int n_states, int n_actions, Mat rows)
    : n_states_(n_states), n_actions_(n_actions), rows_(std::move(rows)) {
  if (n_states <= 0 || n_actions <= 0) throw std::invalid_argument("FeatureMap: empty state/action space");
  if (rows_.rows() != static_cast<Eigen::Index>(n_states) * n_actions)
    throw std::invalid_argument("FeatureMap: expected one row per (state, action) pair");
  if (rows_.cols() <= 0) throw std::invalid_argument("FeatureMap: feature dimension must be positive");
}

FeatureMap FeatureMap::one_hot_states(int n_states, int n_actions) {
  Mat rows = Mat::Zero(static_cast<Eigen::Index>(n_states) * n_actions, n_states);
  for (int s = 0; s < n_states; ++s)
    for (int a = 0; a < n_actions; ++a) rows(s * n_actions + a, s) = 1.0;
  return FeatureMap(n_states, n_actions, std::move(rows));
}

FeatureMap FeatureMap::one_hot_state_actions(int n_states, int n_actions) {
  const Eigen::Index n = static_cast<Eigen::Index>(n_states) * n_actions;
  return FeatureMap(n_states, n_actions, Mat::Identity(n, n));
}

Mat FeatureMap::reward(const Vec& weights) const {
  if (weights.size() != dim()) {
    std::ostringstream os;
    os << "reward weights have length " << weights.size() << " but feature dimension is " << dim();
    throw std::invalid_argument(os.str());
  }
  const Vec flat = rows_ * weights;
  // Row-major reshape: entry (s, a) is flat[s * A + a].
  Mat r(n_states_, n_actions_);
  for (int s = 0; s < n_states_; ++s)
    for (int a = 0; a < n_actions_; ++a) r(s, a) = flat(s * n_actions_ + a);
  return r;
}

FeatureMap FeatureMap::scaled(double c) const { return FeatureMap(n_states_, n_actions_, rows_ * c); }

bool FeatureMap::state_only() const {
  for (int s = 0; s < n_states_; ++s)
    for (int a = 1; a < n_actions_; ++a)
      if (row(s, a) != row(s, 0)) return false;
  return true;
}

std::vector<int> GridworldSpec::corners() const {
  return {index(0, 0), index(0, width - 1), index(height - 1, 0), index(height - 1, width - 1)};
}

std::vector<int> GridworldSpec::resolved_goals() const {
  if (!goal_states.empty()) return goal_states;
  return {index(0, 0), index(0, width - 1), index(height - 1, width - 1)};
}

Gridworld build_gridworld(const GridworldSpec& spec, double gamma, int max_horizon) {
  if (spec.width < 2 || spec.height < 2) {
    std::ostringstream os;
    os << "gridworld must be at least 2x2, got " << spec.width << "x" << spec.height;
    throw std::invalid_argument(os.str());
  }
  if (!(spec.slip >= 0.0 && spec.slip <= 1.0)) throw std::invalid_argument("gridworld slip must lie in [0, 1]");

  const auto goals = spec.resolved_goals();
  const auto corners = spec.corners();
  std::set<int> distinct(goals.begin(), goals.end());
  if (goals.size() != 3 || distinct.size() != 3)
    throw std::invalid_argument("gridworld needs exactly 3 distinct goal corners");
  for (int g : goals) {
    if (std::find(corners.begin(), corners.end(), g) == corners.end()) {
      std::ostringstream os;
      os << "goal state " << g << " is not a grid corner";
      throw std::invalid_argument(os.str());
    }
  }

  const int S = spec.width * spec.height;
  const int A = 4;
  TabularMdp mdp;
  mdp.n_states = S;
  mdp.n_actions = A;
  mdp.gamma = gamma;
  mdp.max_horizon = max_horizon;
  mdp.terminal.assign(goals.begin(), goals.end());
  std::sort(mdp.terminal.begin(), mdp.terminal.end());
  mdp.transition.assign(A, Mat::Zero(S, S));

  auto move = [&](int s, int a) {
    int row = s / spec.width;
    int col = s % spec.width;
    switch (static_cast<GridAction>(a)) {
      case GridAction::Up: row = std::max(row - 1, 0); break;
      case GridAction::Down: row = std::min(row + 1, spec.height - 1); break;
      case GridAction::Left: col = std::max(col - 1, 0); break;
      case GridAction::Right: col = std::min(col + 1, spec.width - 1); break;
    }
    return spec.index(row, col);
  };

  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < A; ++a) {
      if (mdp.is_terminal(s)) {
        mdp.transition[a](s, s) = 1.0;
        continue;
      }
      mdp.transition[a](s, move(s, a)) += 1.0 - spec.slip;
      for (int b = 0; b < A; ++b) mdp.transition[a](s, move(s, b)) += spec.slip / A;
    }
  }

  mdp.p0 = Vec::Zero(S);
  const int n_start = S - static_cast<int>(mdp.terminal.size());
  for (int s = 0; s < S; ++s)
    if (!mdp.is_terminal(s)) mdp.p0(s) = 1.0 / n_start;

  Vec theta = Vec::Constant(S, spec.step_reward);
  for (int g : goals) theta(g) = spec.goal_reward;

  require_valid(mdp);
  return {std::move(mdp), FeatureMap::one_hot_states(S, A), std::move(theta)};
}

std::vector<bool> reachable_within(const TabularMdp& mdp, int horizon) {
  std::vector<int> depth(mdp.n_states, -1);
  std::deque<int> frontier;
  for (int s = 0; s < mdp.n_states; ++s) {
    if (mdp.p0(s) > 0.0) {
      depth[s] = 0;
      frontier.push_back(s);
    }
  }
  while (!frontier.empty()) {
    const int s = frontier.front();
    frontier.pop_front();
    if (mdp.is_terminal(s) || depth[s] >= horizon) continue;
    for (int a = 0; a < mdp.n_actions; ++a)
      for (int s2 = 0; s2 < mdp.n_states; ++s2)
        if (mdp.prob(s, a, s2) > 0.0 && depth[s2] < 0) {
          depth[s2] = depth[s] + 1;
          frontier.push_back(s2);
        }
  }
  std::vector<bool> out(mdp.n_states);
  for (int s = 0; s < mdp.n_states; ++s) out[s] = depth[s] >= 0;
  return out;
}

nlohmann::json mdp_to_json(const TabularMdp& mdp) {
  nlohmann::json t = nlohmann::json::array();
  for (int s = 0; s < mdp.n_states; ++s) {
    nlohmann::json per_action = nlohmann::json::array();
    for (int a = 0; a < mdp.n_actions; ++a) {
      std::vector<double> row(mdp.n_states);
      for (int s2 = 0; s2 < mdp.n_states; ++s2) row[s2] = mdp.prob(s, a, s2);
      per_action.push_back(row);
    }
    t.push_back(per_action);
  }
  return {{"n_states", mdp.n_states},
          {"n_actions", mdp.n_actions},
          {"gamma", mdp.gamma},
          {"max_horizon", mdp.max_horizon},
          {"p0", std::vector<double>(mdp.p0.data(), mdp.p0.data() + mdp.p0.size())},
          {"terminal", mdp.terminal},
          {"transition", t}};
}

TabularMdp mdp_from_json(const nlohmann::json& doc) {
  TabularMdp mdp;
  mdp.n_states = doc.at("n_states").get<int>();
  mdp.n_actions = doc.at("n_actions").get<int>();
  mdp.gamma = doc.at("gamma").get<double>();
  mdp.max_horizon = doc.at("max_horizon").get<int>();
  mdp.terminal = doc.at("terminal").get<std::vector<int>>();
  const auto p0 = doc.at("p0").get<std::vector<double>>();
  mdp.p0 = Eigen::Map<const Vec>(p0.data(), static_cast<Eigen::Index>(p0.size()));
  mdp.transition.assign(mdp.n_actions, Mat::Zero(mdp.n_states, mdp.n_states));
  const auto& t = doc.at("transition");
  if (static_cast<int>(t.size()) != mdp.n_states) throw std::invalid_argument("transition tensor has wrong state count");
  for (int s = 0; s < mdp.n_states; ++s) {
    if (static_cast<int>(t[s].size()) != mdp.n_actions)
      throw std::invalid_argument("transition tensor has wrong action count");
    for (int a = 0; a < mdp.n_actions; ++a) {
      const auto row = t[s][a].get<std::vector<double>>();
      if (static_cast<int>(row.size()) != mdp.n_states)
        throw std::invalid_argument("transition row has wrong length");
      for (int s2 = 0; s2 < mdp.n_states; ++s2) mdp.transition[a](s, s2) = row[s2];
    }
  }
  return mdp;
}

nlohmann::json gridworld_spec_to_json(const GridworldSpec& spec) {
  return {{"width", spec.width},
          {"height", spec.height},
          {"goal_states", spec.resolved_goals()},
          {"goal_reward", spec.goal_reward},
          {"step_reward", spec.step_reward},
          {"slip", spec.slip}};
}

GridworldSpec gridworld_spec_from_json(const nlohmann::json& doc) {
  GridworldSpec spec;
  spec.width = doc.value("width", spec.width);
  spec.height = doc.value("height", spec.height);
  if (doc.contains("goal_states")) spec.goal_states = doc.at("goal_states").get<std::vector<int>>();
  spec.goal_reward = doc.value("goal_reward", spec.goal_reward);
  spec.step_reward = doc.value("step_reward", spec.step_reward);
  spec.slip = doc.value("slip", spec.slip);
  return spec;
}

}  // namespace irleed
