#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "irleed/config.hpp"
#include "irleed/demonstrators.hpp"
#include "irleed/evalx.hpp"

namespace irleed {

inline constexpr const char* kResultsHeader =
    "setting_id,beta_mean,lambda,seed,method,mean_return,std_error,rel_improvement,wall_ms,converged";

struct ResultRow {
  int setting_id = 0;
  double beta_mean = 0.0;
  double lambda = 0.0;
  int seed = 0;
  std::string method;
  double mean_return = 0.0;
  double std_error = 0.0;
  double rel_improvement = 0.0;  // NaN (empty cell) when there is no IRL baseline for the row
  double wall_ms = 0.0;
  bool converged = false;
};

std::string format_result_row(const ResultRow& row);
/// Parses one CSV line; nullopt for the header and for malformed lines.
std::optional<ResultRow> parse_result_row(const std::string& line);
std::vector<ResultRow> read_results_csv(const std::filesystem::path& path);
std::vector<ResultRow> read_results_csv(std::istream& in);
/// Header plus rows sorted by (setting_id, seed, method); written to a
/// temporary file and renamed into place.
void write_results_csv(const std::filesystem::path& path, std::vector<ResultRow> rows);

/// Output directory precedence: IRLEED_OUT_DIR, then the command line, then the config.
std::filesystem::path resolve_out_dir(const std::string& cli_out, const ExperimentConfig& config);

struct OutputLayout {
  std::filesystem::path root;

  std::filesystem::path results() const { return root / "results.csv"; }
  std::filesystem::path dataset(int setting_id, int seed) const;
  std::filesystem::path metadata(int setting_id, int seed) const;
  std::filesystem::path checkpoint(int setting_id, int seed, const std::string& method) const;
  std::filesystem::path heatmap(int setting_id, int seed, const std::string& method) const;
};

/// Everything the sweep needs that does not change between cells.
struct Environment {
  Gridworld world;
  explicit Environment(const ExperimentConfig& config);
};

/// Dataset of one (setting, seed) cell, drawn from Rng::derive(master, setting, seed, "dataset").
GeneratedDataset generate_cell_dataset(const ExperimentConfig& config, const Environment& env, int setting_id,
                                       int seed);
/// Sidecar with the generating setting, ground truth and seeds.
nlohmann::json dataset_metadata(const ExperimentConfig& config, const GeneratedDataset& generated, int setting_id,
                                int seed);

struct TrainedModel {
  std::string method;
  Vec theta;
  bool converged = false;
  double wall_ms = 0.0;
  nlohmann::json checkpoint;
};

/// Trains "irl" on the pooled dataset or "irleed" on the labelled one.
TrainedModel train_method(const ExperimentConfig& config, const Environment& env, const std::string& method,
                          const MixedDataset& dataset, Rng& rng);

/// True-reward score of the soft policy under theta (Monte-Carlo or exact per config).
EvalReport evaluate_theta(const ExperimentConfig& config, const Environment& env, const Vec& theta, Rng& rng);

/// Reads theta back from a checkpoint written by train_method.
Vec checkpoint_theta(const nlohmann::json& checkpoint);

struct SweepOptions {
  int jobs = 1;
  bool record_timing = true;  // false writes wall_ms = 0 so reruns are byte-identical
};

struct SweepOutcome {
  std::vector<ResultRow> rows;  // every row in the results file after the sweep
  int computed = 0;             // rows produced by this call
  int skipped = 0;              // rows already present
  std::vector<std::string> failures;
  std::filesystem::path results_path;
};

/// Runs every (setting, seed) cell not already complete in <out>/results.csv.
SweepOutcome run_sweep(const ExperimentConfig& config, const std::filesystem::path& out_dir,
                       const SweepOptions& options = {});

struct CellSummary {
  int setting_id = 0;
  double beta_mean = 0.0;
  double lambda = 0.0;
  int n_seeds = 0;
  double irl_mean = 0.0;
  double irl_std_error = 0.0;
  double irleed_mean = 0.0;
  double irleed_std_error = 0.0;
  double rel_improvement = 0.0;  // relative_improvement of the two cell means
  bool shifted = false;
  double mean_wall_ms = 0.0;
};

struct SweepSummary {
  std::vector<CellSummary> cells;  // cells with rows for both methods, by setting id
  double grand_mean_improvement = 0.0;
  std::vector<double> beta_means;  // distinct axis values, ascending
  std::vector<double> lambdas;
  int n_shifted = 0;
  int n_unconverged = 0;
};

/// The shifted improvement variant needs the return range; with the default
/// grid rewards are non-negative, so the range is [0, goal_reward / (1 - gamma)].
SweepSummary summarize(const std::vector<ResultRow>& rows, const ReturnRange& range);

/// Rows are beta means (ascending), columns lambdas (ascending, inf last);
/// entries are per-cell relative improvements, empty where a cell is missing.
void write_heatmap_csv(std::ostream& out, const SweepSummary& summary);
/// Both methods' mean returns against lambda at one beta mean (default: the largest).
void write_accuracy_slice_csv(std::ostream& out, const SweepSummary& summary, std::optional<double> beta_mean = {});
nlohmann::json summary_to_json(const SweepSummary& summary);

}  // namespace irleed
