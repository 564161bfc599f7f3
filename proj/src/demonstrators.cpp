#include "irleed/demonstrators.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace irleed {

void SweepSetting::validate() const {
  std::ostringstream os;
  if (!(precision_level > 0.0) || !std::isfinite(precision_level))
    os << "precision_level must be a positive finite number (got " << precision_level << "); ";
  if (!(accuracy_lambda > 0.0)) os << "accuracy_lambda must be positive or inf (got " << accuracy_lambda << "); ";
  if (n_demonstrators < 1) os << "n_demonstrators must be at least 1; ";
  if (n_trajectories_each < 1) os << "n_trajectories_each must be at least 1; ";
  const auto msg = os.str();
  if (!msg.empty()) throw std::invalid_argument("invalid sweep setting: " + msg.substr(0, msg.size() - 2));
}

std::vector<double> full_scale_beta_maxima() { return {0.4, 0.5, 1, 1.5, 2, 2.5, 3, 3.5, 4, 4.5, 5}; }

std::vector<double> full_scale_lambdas() {
  return {2, 2.5, 3, 3.5, 4, 4.5, 5, 5.5, 6, 10, std::numeric_limits<double>::infinity()};
}

std::vector<DemonstratorParams> sample_demonstrators(const SweepSetting& setting, int k, Rng& rng) {
  setting.validate();
  if (k < 1) throw std::invalid_argument("feature dimension must be positive");
  const double beta_max = 2.0 * setting.precision_level;
  const bool unbiased = std::isinf(setting.accuracy_lambda);
  const double sigma = unbiased ? 0.0 : 1.0 / setting.accuracy_lambda;

  std::vector<DemonstratorParams> out;
  out.reserve(setting.n_demonstrators);
  for (int i = 0; i < setting.n_demonstrators; ++i) {
    DemonstratorParams p;
    p.id = i + 1;
    p.beta = beta_max * rng.uniform();
    p.epsilon = Vec::Zero(k);
    if (!unbiased)
      for (int j = 0; j < k; ++j) p.epsilon(j) = sigma * rng.normal();
    out.push_back(std::move(p));
  }
  return out;
}

GeneratedDataset generate_mixed_dataset(const TabularMdp& mdp, const FeatureMap& features, const Vec& true_theta,
                                        const SweepSetting& setting, Rng& rng, const SoftViOptions& vi) {
  if (true_theta.size() != features.dim()) throw std::invalid_argument("true_theta length differs from feature dim");
  Rng param_rng = rng.child("params");
  GeneratedDataset out;
  out.truth = sample_demonstrators(setting, features.dim(), param_rng);
  for (const auto& p : out.truth) {
    const auto sol = demonstrator_policy(mdp, features, true_theta, p.epsilon, p.beta, vi);
    Rng demo_rng = rng.child("demo", static_cast<std::uint64_t>(p.id));
    DemonstrationSet set{p.id, {}};
    set.trajectories.reserve(setting.n_trajectories_each);
    for (int j = 0; j < setting.n_trajectories_each; ++j)
      set.trajectories.push_back(sample_trajectory(mdp, sol.policy, demo_rng));
    out.dataset.sets.push_back(std::move(set));
  }
  return out;
}

nlohmann::json demonstrator_params_to_json(const std::vector<DemonstratorParams>& params) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& p : params)
    arr.push_back({{"id", p.id},
                   {"beta", p.beta},
                   {"epsilon", std::vector<double>(p.epsilon.data(), p.epsilon.data() + p.epsilon.size())}});
  return arr;
}

std::vector<DemonstratorParams> demonstrator_params_from_json(const nlohmann::json& doc) {
  std::vector<DemonstratorParams> out;
  for (const auto& item : doc) {
    DemonstratorParams p;
    p.id = item.at("id").get<int>();
    p.beta = item.at("beta").get<double>();
    const auto eps = item.at("epsilon").get<std::vector<double>>();
    p.epsilon = Eigen::Map<const Vec>(eps.data(), static_cast<Eigen::Index>(eps.size()));
    out.push_back(std::move(p));
  }
  return out;
}

nlohmann::json sweep_setting_to_json(const SweepSetting& setting) {
  nlohmann::json lambda = std::isinf(setting.accuracy_lambda) ? nlohmann::json("inf")
                                                                : nlohmann::json(setting.accuracy_lambda);
  return {{"precision_level", setting.precision_level},
          {"accuracy_lambda", lambda},
          {"n_demonstrators", setting.n_demonstrators},
          {"n_trajectories_each", setting.n_trajectories_each}};
}

}  // namespace irleed
