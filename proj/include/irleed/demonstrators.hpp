#pragma once

#include <limits>
#include <vector>

#include <json.hpp>

#include "irleed/rollout.hpp"
#include "irleed/softrl.hpp"

namespace irleed {

/// Reward bias (accuracy) and inverse temperature (precision) of one demonstrator.
struct DemonstratorParams {
  int id = 0;
  double beta = 1.0;
  Vec epsilon;
};

/// One cell of the precision/accuracy grid.
struct SweepSetting {
  double precision_level = 1.0;  // mean of beta ~ Uniform(0, 2 * precision_level)
  double accuracy_lambda = std::numeric_limits<double>::infinity();  // epsilon ~ N(0, I / lambda^2)
  int n_demonstrators = 5;
  int n_trajectories_each = 40;

  void validate() const;
};

/// Full-scale grid axes: 11 beta maxima (precision = max / 2) and 11 lambdas.
std::vector<double> full_scale_beta_maxima();
std::vector<double> full_scale_lambdas();

std::vector<DemonstratorParams> sample_demonstrators(const SweepSetting& setting, int k, Rng& rng);

struct GeneratedDataset {
  MixedDataset dataset;
  std::vector<DemonstratorParams> truth;  // for evaluation bookkeeping only
};

/// Samples demonstrators, builds each one's folded soft policy under
/// true_theta + epsilon_i, and rolls out n_trajectories_each episodes per
/// demonstrator. Demonstrator i draws from rng.child("demo", i).
GeneratedDataset generate_mixed_dataset(const TabularMdp& mdp, const FeatureMap& features, const Vec& true_theta,
                                        const SweepSetting& setting, Rng& rng, const SoftViOptions& vi = {});

nlohmann::json demonstrator_params_to_json(const std::vector<DemonstratorParams>& params);
std::vector<DemonstratorParams> demonstrator_params_from_json(const nlohmann::json& doc);

nlohmann::json sweep_setting_to_json(const SweepSetting& setting);

}  // namespace irleed
