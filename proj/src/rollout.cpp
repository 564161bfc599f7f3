#include "irleed/rollout.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace irleed {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t combine(std::uint64_t h, std::uint64_t v) {
  return splitmix64(h ^ (splitmix64(v) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2)));
}

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

std::uint64_t Rng::derive_seed(std::uint64_t master, std::uint64_t setting, std::uint64_t demonstrator,
                               std::string_view purpose) {
  std::uint64_t h = splitmix64(master);
  h = combine(h, setting);
  h = combine(h, demonstrator);
  return combine(h, fnv1a(purpose));
}

std::size_t MixedDataset::n_trajectories() const {
  std::size_t n = 0;
  for (const auto& set : sets) n += set.trajectories.size();
  return n;
}

std::vector<Trajectory> MixedDataset::pooled() const {
  std::vector<Trajectory> out;
  out.reserve(n_trajectories());
  for (const auto& set : sets) out.insert(out.end(), set.trajectories.begin(), set.trajectories.end());
  return out;
}

void MixedDataset::validate() const {
  if (sets.empty()) throw std::invalid_argument("dataset has no demonstrators");
  for (std::size_t i = 0; i < sets.size(); ++i) {
    if (sets[i].id != static_cast<int>(i) + 1) {
      std::ostringstream os;
      os << "demonstrator ids must be 1..N in order; position " << i << " holds id " << sets[i].id;
      throw std::invalid_argument(os.str());
    }
    if (sets[i].trajectories.empty()) {
      std::ostringstream os;
      os << "demonstrator " << sets[i].id << " has no trajectories";
      throw std::invalid_argument(os.str());
    }
  }
}

Trajectory sample_trajectory(const TabularMdp& mdp, const Mat& policy, Rng& rng) {
  Trajectory traj;
  traj.states.reserve(mdp.max_horizon);
  traj.actions.reserve(mdp.max_horizon);
  int s = rng.categorical(mdp.p0);
  for (int t = 0; t < mdp.max_horizon; ++t) {
    const int a = rng.categorical(policy.row(s));
    traj.states.push_back(s);
    traj.actions.push_back(a);
    if (mdp.is_terminal(s)) break;
    s = rng.categorical(mdp.transition[a].row(s));
  }
  return traj;
}

Vec discounted_feature_sum(const Trajectory& traj, const FeatureMap& features, double gamma) {
  Vec out = Vec::Zero(features.dim());
  double discount = 1.0;
  for (std::size_t t = 0; t < traj.size(); ++t) {
    out += discount * features.row(traj.states[t], traj.actions[t]).transpose();
    discount *= gamma;
  }
  return out;
}

Vec empirical_feature_expectation(const std::vector<Trajectory>& trajs, const FeatureMap& features, double gamma) {
  if (trajs.empty()) throw std::invalid_argument("empirical feature expectation of an empty dataset");
  Vec total = Vec::Zero(features.dim());
  for (const auto& traj : trajs) total += discounted_feature_sum(traj, features, gamma);
  return total / static_cast<double>(trajs.size());
}

Vec mc_feature_expectation(const TabularMdp& mdp, const FeatureMap& features, const Mat& policy, int n_episodes,
                           Rng& rng) {
  if (n_episodes < 1) throw std::invalid_argument("n_episodes must be at least 1");
  Vec total = Vec::Zero(features.dim());
  for (int e = 0; e < n_episodes; ++e)
    total += discounted_feature_sum(sample_trajectory(mdp, policy, rng), features, mdp.gamma);
  return total / static_cast<double>(n_episodes);
}

double discounted_return(const Trajectory& traj, const Vec& state_reward, double gamma) {
  double g = 0.0;
  double discount = 1.0;
  for (int s : traj.states) {
    g += discount * state_reward(s);
    discount *= gamma;
  }
  return g;
}

ReturnStats mc_return_stats(const TabularMdp& mdp, const Mat& policy, const Vec& state_reward, int n_episodes,
                            Rng& rng) {
  if (n_episodes < 1) throw std::invalid_argument("n_episodes must be at least 1");
  if (state_reward.size() != mdp.n_states) throw std::invalid_argument("reward vector length differs from n_states");
  double mean = 0.0;
  double m2 = 0.0;
  for (int e = 0; e < n_episodes; ++e) {
    const double g = discounted_return(sample_trajectory(mdp, policy, rng), state_reward, mdp.gamma);
    const double delta = g - mean;
    mean += delta / (e + 1);
    m2 += delta * (g - mean);
  }
  ReturnStats stats;
  stats.n_episodes = n_episodes;
  stats.mean = mean;
  if (n_episodes > 1) stats.std_error = std::sqrt(m2 / (n_episodes - 1) / n_episodes);
  return stats;
}

void write_dataset_jsonl(std::ostream& out, const MixedDataset& dataset) {
  for (const auto& set : dataset.sets) {
    for (const auto& traj : set.trajectories) {
      nlohmann::json record = {{"demonstrator", set.id}, {"states", traj.states}, {"actions", traj.actions}};
      out << record.dump() << '\n';
    }
  }
}

MixedDataset read_dataset_jsonl(std::istream& in) {
  std::map<int, std::vector<Trajectory>> by_id;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto record = nlohmann::json::parse(line);
      Trajectory traj;
      traj.states = record.at("states").get<std::vector<int>>();
      traj.actions = record.at("actions").get<std::vector<int>>();
      if (traj.states.size() != traj.actions.size()) throw std::invalid_argument("states/actions length mismatch");
      if (traj.states.empty()) throw std::invalid_argument("empty trajectory");
      by_id[record.at("demonstrator").get<int>()].push_back(std::move(traj));
    } catch (const std::exception& e) {
      std::ostringstream os;
      os << "dataset line " << line_no << ": " << e.what();
      throw std::invalid_argument(os.str());
    }
  }
  MixedDataset dataset;
  for (auto& [id, trajs] : by_id) dataset.sets.push_back({id, std::move(trajs)});
  dataset.validate();
  return dataset;
}

void save_dataset(const std::filesystem::path& path, const MixedDataset& dataset) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write dataset " + path.string());
  write_dataset_jsonl(out, dataset);
}

MixedDataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read dataset " + path.string());
  return read_dataset_jsonl(in);
}

}  // namespace irleed
