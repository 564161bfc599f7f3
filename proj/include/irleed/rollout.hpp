#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <random>
#include <string_view>
#include <vector>

#include "irleed/mdp.hpp"

namespace irleed {

/// Seeded random stream. Streams for independent consumers are derived by
/// hash-combining (master seed, setting id, demonstrator id, purpose tag)
/// through splitmix64, so the same inputs always give the same stream.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  static std::uint64_t derive_seed(std::uint64_t master, std::uint64_t setting, std::uint64_t demonstrator,
                                   std::string_view purpose);
  static Rng derive(std::uint64_t master, std::uint64_t setting, std::uint64_t demonstrator,
                    std::string_view purpose) {
    return Rng(derive_seed(master, setting, demonstrator, purpose));
  }
  /// Child stream keyed on this stream's seed; does not advance this stream.
  Rng child(std::string_view purpose, std::uint64_t index = 0) const {
    return derive(seed_, index, 0, purpose);
  }

  std::uint64_t seed() const { return seed_; }
  /// Uniform on [0, 1) from the top 53 bits of one draw.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double normal() { return normal_(engine_); }
  /// Index drawn from a probability vector (any Eigen row/column expression).
  template <typename Probs>
  int categorical(const Probs& probs) {
    const double u = uniform();
    double acc = 0.0;
    int last = -1;
    for (Eigen::Index i = 0; i < probs.size(); ++i) {
      if (probs(i) <= 0.0) continue;
      acc += probs(i);
      last = static_cast<int>(i);
      if (u < acc) return last;
    }
    return last;
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

struct Trajectory {
  std::vector<int> states;
  std::vector<int> actions;

  std::size_t size() const { return states.size(); }
  bool operator==(const Trajectory&) const = default;
};

struct DemonstrationSet {
  int id = 0;
  std::vector<Trajectory> trajectories;
};

/// Trajectories grouped by the demonstrator that produced them.
struct MixedDataset {
  std::vector<DemonstrationSet> sets;

  int n_demonstrators() const { return static_cast<int>(sets.size()); }
  std::size_t n_trajectories() const;
  std::vector<Trajectory> pooled() const;
  /// Throws unless ids are exactly 1..N (in order) and every set is non-empty.
  void validate() const;
};

/// s0 ~ p0, a_t ~ pi(.|s_t), s_{t+1} ~ T(.|s_t, a_t). The step taken in a
/// terminal state is recorded and ends the episode; otherwise the episode
/// is cut after mdp.max_horizon steps.
Trajectory sample_trajectory(const TabularMdp& mdp, const Mat& policy, Rng& rng);

/// sum_t gamma^t f(s_t, a_t) along one trajectory.
Vec discounted_feature_sum(const Trajectory& traj, const FeatureMap& features, double gamma);

/// Mean over trajectories of the discounted feature sum. Rejects an empty set.
Vec empirical_feature_expectation(const std::vector<Trajectory>& trajs, const FeatureMap& features, double gamma);

Vec mc_feature_expectation(const TabularMdp& mdp, const FeatureMap& features, const Mat& policy, int n_episodes,
                           Rng& rng);

struct ReturnStats {
  double mean = 0.0;
  double std_error = 0.0;
  int n_episodes = 0;
};

/// Discounted return sum_t gamma^t r(s_t) of one trajectory.
double discounted_return(const Trajectory& traj, const Vec& state_reward, double gamma);

ReturnStats mc_return_stats(const TabularMdp& mdp, const Mat& policy, const Vec& state_reward, int n_episodes,
                            Rng& rng);
inline double mc_return(const TabularMdp& mdp, const Mat& policy, const Vec& state_reward, int n_episodes, Rng& rng) {
  return mc_return_stats(mdp, policy, state_reward, n_episodes, rng).mean;
}

/// JSON Lines, one trajectory per line:
/// {"demonstrator": i, "states": [...], "actions": [...]}
void write_dataset_jsonl(std::ostream& out, const MixedDataset& dataset);
MixedDataset read_dataset_jsonl(std::istream& in);
void save_dataset(const std::filesystem::path& path, const MixedDataset& dataset);
MixedDataset load_dataset(const std::filesystem::path& path);

}  // namespace irleed
