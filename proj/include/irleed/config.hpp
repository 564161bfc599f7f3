#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "irleed/demonstrators.hpp"
#include "irleed/irleed.hpp"
#include "irleed/maxent_irl.hpp"
#include "irleed/mdp.hpp"

namespace irleed {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Parses the TOML subset used by experiment files into a JSON object:
/// tables and dotted table headers, bare/quoted/dotted keys, basic and literal
/// strings, integers, floats (including inf and nan), booleans, arrays (may
/// span lines) and inline tables. Dates and arrays of tables are rejected.
nlohmann::json parse_toml(std::string_view text);

/// Reads a .json file as JSON and anything else as TOML.
nlohmann::json load_config_document(const std::filesystem::path& path);

/// How final policies are scored against the true reward.
enum class EvaluationMode { MonteCarlo, Exact };

struct ExperimentConfig {
  std::string name = "experiment";
  GridworldSpec grid;
  double gamma = 0.9;
  int max_horizon = 100;
  std::vector<double> beta_means{0.5, 2.0, 5.0};
  std::vector<double> lambdas;  // may contain +inf
  int n_demonstrators = 5;
  int n_trajectories = 40;
  int n_seeds = 10;
  std::vector<std::string> methods{"irl", "irleed"};
  IrlConfig irl;
  IrleedConfig irleed;
  EvaluationMode evaluation = EvaluationMode::MonteCarlo;
  int eval_episodes = 100;
  std::string out_dir = "out";
  std::uint64_t master_seed = 0;
  bool write_artifacts = true;

  ExperimentConfig();
  /// Throws ConfigError naming the first offending field.
  void validate() const;
  int n_settings() const { return static_cast<int>(beta_means.size() * lambdas.size()); }
  /// Setting ids run row-major over (beta mean, lambda).
  SweepSetting setting(int setting_id) const;
  bool runs(std::string_view method) const;
};

/// Missing keys keep their defaults; unknown keys are rejected.
ExperimentConfig experiment_config_from_json(const nlohmann::json& doc);
nlohmann::json experiment_config_to_json(const ExperimentConfig& config);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

}  // namespace irleed
