#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "irleed/harness.hpp"

namespace fs = std::filesystem;
using namespace irleed;

namespace {

struct Globals {
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string log_level = "info";
};

ExperimentConfig load_config(const std::string& path, const Globals& g) {
  auto config = load_experiment_config(path);
  if (g.seed) config.master_seed = *g.seed;
  return config;
}

void check_dataset_fits(const MixedDataset& dataset, const Environment& env) {
  const auto& mdp = env.world.mdp;
  for (const auto& set : dataset.sets)
    for (const auto& traj : set.trajectories) {
      if (traj.size() > static_cast<std::size_t>(mdp.max_horizon))
        throw std::invalid_argument(fmt::format("dataset trajectory of length {} exceeds max_horizon {}",
                                                traj.size(), mdp.max_horizon));
      for (std::size_t t = 0; t < traj.size(); ++t) {
        if (traj.states[t] < 0 || traj.states[t] >= mdp.n_states)
          throw std::invalid_argument(
              fmt::format("dataset refers to state {} but the environment has feature dimension {} ({} states)",
                          traj.states[t], env.world.features.dim(), mdp.n_states));
        if (traj.actions[t] < 0 || traj.actions[t] >= mdp.n_actions)
          throw std::invalid_argument(fmt::format("dataset refers to action {} but the environment has {} actions",
                                                  traj.actions[t], mdp.n_actions));
      }
    }
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return nlohmann::json::parse(in);
}

int cmd_gen_demos(const std::string& config_path, std::optional<int> setting, std::optional<int> seed,
                  const Globals& g) {
  const auto config = load_config(config_path, g);
  const Environment env(config);
  const OutputLayout layout{resolve_out_dir(g.out, config)};
  if (setting && (*setting < 0 || *setting >= config.n_settings()))
    throw std::invalid_argument(fmt::format("--setting {} outside 0..{}", *setting, config.n_settings() - 1));
  if (seed && *seed < 0) throw std::invalid_argument("--seed must be non-negative");
  std::vector<std::pair<int, int>> cells;
  for (int s = 0; s < config.n_settings(); ++s) {
    if (setting && *setting != s) continue;
    if (seed) {
      cells.emplace_back(s, *seed);
      continue;
    }
    for (int k = 0; k < config.n_seeds; ++k) cells.emplace_back(s, k);
  }
  for (const auto& [s, k] : cells) {
    const auto generated = generate_cell_dataset(config, env, s, k);
    save_dataset(layout.dataset(s, k), generated.dataset);
    write_file(layout.metadata(s, k), dataset_metadata(config, generated, s, k).dump(2) + "\n");
    std::cout << layout.dataset(s, k).string() << "\n";
  }
  spdlog::info("wrote {} datasets", cells.size());
  return 0;
}

int cmd_train(const std::string& config_path, const std::string& method, const std::string& dataset_path,
              const std::string& checkpoint_out, const Globals& g) {
  const auto config = load_config(config_path, g);
  const Environment env(config);
  const auto dataset = load_dataset(dataset_path);
  check_dataset_fits(dataset, env);
  Rng rng = Rng::derive(config.master_seed, 0, 0, "train-" + method);
  auto model = train_method(config, env, method, dataset, rng);
  model.checkpoint["dataset"] = dataset_path;
  fs::path out = checkpoint_out;
  if (out.empty())
    out = resolve_out_dir(g.out, config) / "checkpoints" / (fs::path(dataset_path).stem().string() + "_" + method + ".json");
  write_file(out, model.checkpoint.dump() + "\n");
  spdlog::info("{} trained in {:.0f} ms (converged: {})", method, model.wall_ms, model.converged);
  std::cout << out.string() << "\n";
  return 0;
}

int cmd_eval(const std::string& checkpoint_path, const std::string& env_path, int episodes, const Globals& g) {
  auto config = load_config(env_path, g);
  if (episodes > 0) config.eval_episodes = episodes;
  const Environment env(config);
  const auto ckpt = read_json(checkpoint_path);
  const Vec theta = checkpoint_theta(ckpt);
  if (theta.size() != env.world.features.dim())
    throw std::invalid_argument(fmt::format("checkpoint theta has length {} but the environment feature dimension is {}",
                                            theta.size(), env.world.features.dim()));
  Rng rng = Rng::derive(config.master_seed, 0, 0, "eval");
  auto report = evaluate_theta(config, env, theta, rng);
  report.method = ckpt.value("method", "");
  const nlohmann::json doc = {{"mean_return", report.mean_return},
                              {"std_error", report.std_error},
                              {"n_episodes", report.n_episodes},
                              {"method", report.method},
                              {"seed", report.seed},
                              {"exact_return", exact_return(env.world.mdp, env.world.features,
                                                            soft_value_iteration(env.world.mdp, env.world.features,
                                                                                 theta, config.irl.vi)
                                                                .policy,
                                                            env.world.true_theta)}};
  std::cout << doc.dump(2) << "\n";
  return 0;
}

int cmd_sweep(const std::string& config_path, int jobs, bool no_timing, const Globals& g) {
  const auto config = load_config(config_path, g);
  const fs::path out = resolve_out_dir(g.out, config);
  const auto outcome = run_sweep(config, out, {jobs, !no_timing});
  const Environment env(config);
  const auto summary = summarize(outcome.rows, return_range(env.world.mdp, env.world.features, env.world.true_theta));
  std::cout << fmt::format("rows computed: {}, skipped: {}, failed cells: {}\n", outcome.computed, outcome.skipped,
                           outcome.failures.size());
  for (const auto& f : outcome.failures) std::cout << "  failed: " << f << "\n";
  if (!summary.cells.empty())
    std::cout << fmt::format("grand-mean relative improvement: {:.4f} over {} cells\n",
                             summary.grand_mean_improvement, summary.cells.size());
  std::cout << outcome.results_path.string() << "\n";
  return outcome.failures.empty() ? 0 : 3;
}

int cmd_report(const std::string& results_path, const std::string& config_path, std::optional<double> slice_beta,
               const Globals& g) {
  if (!fs::exists(results_path)) throw std::invalid_argument("no such results file: " + results_path);
  const auto rows = read_results_csv(results_path);
  if (rows.empty()) throw std::invalid_argument("results file has no rows: " + results_path);
  ReturnRange range{0.0, 10.0};
  if (!config_path.empty()) {
    const auto config = load_config(config_path, g);
    const Environment env(config);
    range = return_range(env.world.mdp, env.world.features, env.world.true_theta);
  }
  const auto summary = summarize(rows, range);
  if (summary.cells.empty()) throw std::invalid_argument("no cell has rows for both irl and irleed");
  fs::path out = g.out;
  if (const char* env = std::getenv("IRLEED_OUT_DIR"); env && *env) out = env;
  if (out.empty()) out = fs::path(results_path).parent_path();
  if (out.empty()) out = ".";
  std::ostringstream heat, slice;
  write_heatmap_csv(heat, summary);
  write_accuracy_slice_csv(slice, summary, slice_beta);
  write_file(out / "heatmap.csv", heat.str());
  write_file(out / "accuracy_slice.csv", slice.str());
  write_file(out / "summary.json", summary_to_json(summary).dump(2) + "\n");

  std::cout << fmt::format("{:>4} {:>9} {:>7} {:>6} {:>10} {:>10} {:>10}\n", "id", "beta_mean", "lambda", "seeds",
                           "irl", "irleed", "rel_impr");
  for (const auto& c : summary.cells)
    std::cout << fmt::format("{:>4} {:>9} {:>7} {:>6} {:>10.4f} {:>10.4f} {:>10.4f}{}\n", c.setting_id, c.beta_mean,
                             c.lambda, c.n_seeds, c.irl_mean, c.irleed_mean, c.rel_improvement,
                             c.shifted ? " (shifted)" : "");
  std::cout << fmt::format("grand-mean relative improvement: {:.4f} ({:.1f}%) over {} cells\n",
                           summary.grand_mean_improvement, 100.0 * summary.grand_mean_improvement,
                           summary.cells.size());
  std::cout << (out / "heatmap.csv").string() << "\n";
  return 0;
}

int cmd_dump_reward(const std::string& checkpoint_path, const std::string& format, const std::string& output) {
  const auto ckpt = read_json(checkpoint_path);
  if (!ckpt.contains("config")) throw std::invalid_argument("checkpoint carries no config section");
  const auto config = experiment_config_from_json(ckpt.at("config"));
  const Mat grid = reward_grid_export(checkpoint_theta(ckpt), config.grid);
  std::ostringstream os;
  if (format == "csv")
    write_grid_csv(os, grid);
  else
    write_grid_pgm(os, grid);
  if (output.empty() || output == "-") {
    std::cout << os.str();
    std::cout.flush();
  } else {
    write_file(output, os.str());
    std::cout << output << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Inverse RL from suboptimal, heterogeneous demonstrators: datasets, training, sweeps and reports"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  std::uint64_t seed_value = 0;
  auto* seed_opt = app.add_option("--seed", seed_value, "Master seed (overrides the config)");
  app.add_option("--out", g.out, "Output directory (IRLEED_OUT_DIR takes precedence)");
  app.add_option("--log-level", g.log_level, "trace|debug|info|warn|error|off")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "critical", "off"}));

  std::string config_path, method, dataset_path, checkpoint_path, env_path, results_path, format, output;
  int setting = -1, seed_index = -1, jobs = 1, episodes = 0;
  bool no_timing = false;
  double slice_beta = 0.0;

  auto* gen = app.add_subcommand("gen-demos", "Generate mixed demonstration datasets");
  gen->add_option("config", config_path, "Experiment config (TOML or JSON)")->required()->check(CLI::ExistingFile);
  auto* setting_opt = gen->add_option("--setting", setting, "Setting id (row-major over beta means x lambdas)");
  // After the subcommand, --seed names the seed index; the master seed goes before it.
  auto* seed_index_opt = gen->add_option("--seed", seed_index, "Seed index within the setting");

  auto* train = app.add_subcommand("train", "Train one method on a dataset");
  train->add_option("config", config_path, "Experiment config")->required()->check(CLI::ExistingFile);
  train->add_option("--method", method, "irl or irleed")->required()->check(CLI::IsMember({"irl", "irleed"}));
  train->add_option("--dataset", dataset_path, "Dataset JSONL")->required()->check(CLI::ExistingFile);
  train->add_option("--checkpoint", checkpoint_path, "Checkpoint output path");

  auto* eval = app.add_subcommand("eval", "Score a checkpoint under the true reward");
  eval->add_option("--checkpoint", checkpoint_path, "Checkpoint JSON")->required()->check(CLI::ExistingFile);
  eval->add_option("--env", env_path, "Experiment config describing the environment")
      ->required()
      ->check(CLI::ExistingFile);
  eval->add_option("--episodes", episodes, "Evaluation episodes (default from config)");

  auto* sweep = app.add_subcommand("sweep", "Run the precision/accuracy sweep");
  sweep->add_option("config", config_path, "Experiment config")->required()->check(CLI::ExistingFile);
  sweep->add_option("--jobs,-j", jobs, "Worker threads")->check(CLI::PositiveNumber);
  sweep->add_flag("--no-timing", no_timing, "Write wall_ms = 0 for byte-identical reruns");

  auto* report = app.add_subcommand("report", "Summarize a results CSV");
  report->add_option("results", results_path, "results.csv")->required();
  report->add_option("--config", config_path, "Config used for the sweep (sets the return range)");
  auto* slice_opt = report->add_option("--slice-beta", slice_beta, "Beta mean of the accuracy slice");

  auto* dump = app.add_subcommand("dump-reward", "Export a checkpoint's normalized reward grid");
  dump->add_option("--checkpoint", checkpoint_path, "Checkpoint JSON")->required()->check(CLI::ExistingFile);
  dump->add_option("--format", format, "csv or pgm")->required()->check(CLI::IsMember({"csv", "pgm"}));
  dump->add_option("--output,-o", output, "Output file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  spdlog::set_default_logger(spdlog::stderr_color_mt("irleed"));
  spdlog::set_level(spdlog::level::from_str(g.log_level));
  if (seed_opt->count() > 0) g.seed = seed_value;

  try {
    if (*gen)
      return cmd_gen_demos(config_path, setting_opt->count() ? std::optional<int>(setting) : std::nullopt,
                           seed_index_opt->count() ? std::optional<int>(seed_index) : std::nullopt, g);
    if (*train) return cmd_train(config_path, method, dataset_path, checkpoint_path, g);
    if (*eval) return cmd_eval(checkpoint_path, env_path, episodes, g);
    if (*sweep) return cmd_sweep(config_path, jobs, no_timing, g);
    if (*report)
      return cmd_report(results_path, config_path, slice_opt->count() ? std::optional<double>(slice_beta) : std::nullopt,
                        g);
    if (*dump) return cmd_dump_reward(checkpoint_path, format, output);
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 2;
  }
  return 1;
}
