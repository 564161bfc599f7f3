#include "irleed/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>
#include <tuple>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

namespace irleed {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string format_real(double x) {
  if (std::isnan(x)) return "";
  return fmt::format("{}", x);
}

double parse_real(const std::string& field) {
  if (field.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::size_t used = 0;
  const double v = std::stod(field, &used);
  if (used != field.size()) throw std::invalid_argument("trailing characters");
  return v;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

auto row_key(const ResultRow& r) { return std::make_tuple(r.setting_id, r.seed, r.method); }

std::string cell_stem(int setting_id, int seed) { return fmt::format("setting{:03d}_seed{:03d}", setting_id, seed); }

std::vector<double> to_std(const Vec& v) { return {v.data(), v.data() + v.size()}; }

json trace_to_json(const std::vector<TraceRecord>& trace) {
  json arr = json::array();
  for (const auto& t : trace)
    arr.push_back({{"phase", t.phase},
                   {"outer", t.outer},
                   {"step", t.step},
                   {"grad_norm", t.grad_norm},
                   {"theta_delta", t.theta_delta},
                   {"theta_norm", t.theta_norm}});
  return arr;
}

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

double mean_of(const std::vector<double>& xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return xs.empty() ? 0.0 : s / static_cast<double>(xs.size());
}

double std_error_of(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean_of(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1) / static_cast<double>(xs.size()));
}

}  // namespace

std::string format_result_row(const ResultRow& r) {
  return fmt::format("{},{},{},{},{},{},{},{},{},{}", r.setting_id, format_real(r.beta_mean), format_real(r.lambda),
                     r.seed, r.method, format_real(r.mean_return), format_real(r.std_error),
                     format_real(r.rel_improvement), format_real(r.wall_ms), r.converged ? 1 : 0);
}

std::optional<ResultRow> parse_result_row(const std::string& line) {
  const auto f = split_csv(line);
  if (f.size() != 10 || f[0] == "setting_id") return std::nullopt;
  try {
    ResultRow r;
    r.setting_id = std::stoi(f[0]);
    r.beta_mean = parse_real(f[1]);
    r.lambda = parse_real(f[2]);
    r.seed = std::stoi(f[3]);
    r.method = f[4];
    r.mean_return = parse_real(f[5]);
    r.std_error = parse_real(f[6]);
    r.rel_improvement = parse_real(f[7]);
    r.wall_ms = parse_real(f[8]);
    if (f[9] != "0" && f[9] != "1") return std::nullopt;
    r.converged = f[9] == "1";
    if (r.method != "irl" && r.method != "irleed") return std::nullopt;
    if (std::isnan(r.mean_return)) return std::nullopt;
    return r;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

std::vector<ResultRow> read_results_csv(std::istream& in) {
  std::vector<ResultRow> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (auto r = parse_result_row(line)) rows.push_back(std::move(*r));
  }
  return rows;
}

std::vector<ResultRow> read_results_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) return {};
  return read_results_csv(in);
}

void write_results_csv(const fs::path& path, std::vector<ResultRow> rows) {
  std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return row_key(a) < row_key(b); });
  std::string text = std::string(kResultsHeader) + "\n";
  for (const auto& r : rows) text += format_result_row(r) + "\n";
  const fs::path tmp = path.string() + ".tmp";
  write_text(tmp, text);
  fs::rename(tmp, path);
}

fs::path resolve_out_dir(const std::string& cli_out, const ExperimentConfig& config) {
  if (const char* env = std::getenv("IRLEED_OUT_DIR"); env && *env) return env;
  if (!cli_out.empty()) return cli_out;
  return config.out_dir;
}

fs::path OutputLayout::dataset(int setting_id, int seed) const {
  return root / "datasets" / (cell_stem(setting_id, seed) + ".jsonl");
}
fs::path OutputLayout::metadata(int setting_id, int seed) const {
  return root / "datasets" / (cell_stem(setting_id, seed) + ".meta.json");
}
fs::path OutputLayout::checkpoint(int setting_id, int seed, const std::string& method) const {
  return root / "checkpoints" / (cell_stem(setting_id, seed) + "_" + method + ".json");
}
fs::path OutputLayout::heatmap(int setting_id, int seed, const std::string& method) const {
  return root / "heatmaps" / (cell_stem(setting_id, seed) + "_" + method + ".pgm");
}

Environment::Environment(const ExperimentConfig& config)
    : world(build_gridworld(config.grid, config.gamma, config.max_horizon)) {}

GeneratedDataset generate_cell_dataset(const ExperimentConfig& config, const Environment& env, int setting_id,
                                       int seed) {
  Rng rng = Rng::derive(config.master_seed, static_cast<std::uint64_t>(setting_id), static_cast<std::uint64_t>(seed),
                        "dataset");
  return generate_mixed_dataset(env.world.mdp, env.world.features, env.world.true_theta, config.setting(setting_id),
                                rng, config.irl.vi);
}

json dataset_metadata(const ExperimentConfig& config, const GeneratedDataset& generated, int setting_id, int seed) {
  return {{"setting_id", setting_id},
          {"seed", seed},
          {"master_seed", config.master_seed},
          {"dataset_stream_seed", Rng::derive_seed(config.master_seed, static_cast<std::uint64_t>(setting_id),
                                                   static_cast<std::uint64_t>(seed), "dataset")},
          {"setting", sweep_setting_to_json(config.setting(setting_id))},
          {"env", experiment_config_to_json(config).at("env")},
          {"truth", demonstrator_params_to_json(generated.truth)}};
}

TrainedModel train_method(const ExperimentConfig& config, const Environment& env, const std::string& method,
                          const MixedDataset& dataset, Rng& rng) {
  const auto& w = env.world;
  TrainedModel model;
  model.method = method;
  const auto t0 = std::chrono::steady_clock::now();
  if (method == "irl") {
    const auto result = train_irl(dataset.pooled(), w.mdp, w.features, config.irl, rng);
    model.theta = result.theta;
    model.converged = result.converged;
    model.checkpoint = {{"theta", to_std(result.theta)},
                        {"epsilons", json::array()},
                        {"betas", json::array()},
                        {"converged", result.converged},
                        {"rejected_steps", result.rejected_steps},
                        {"trace", trace_to_json(result.trace)}};
  } else if (method == "irleed") {
    const auto est = train_irleed(dataset, w.mdp, w.features, config.irleed, rng);
    model.theta = est.theta;
    model.converged = est.converged;
    model.checkpoint = estimate_to_json(est);
    model.checkpoint["rejected_steps"] = est.rejected_steps;
  } else {
    throw std::invalid_argument("unknown method '" + method + "'");
  }
  model.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  model.checkpoint["method"] = method;
  model.checkpoint["config"] = experiment_config_to_json(config);
  return model;
}

EvalReport evaluate_theta(const ExperimentConfig& config, const Environment& env, const Vec& theta, Rng& rng) {
  const auto& w = env.world;
  const auto policy = soft_value_iteration(w.mdp, w.features, theta, config.irl.vi).policy;
  if (config.evaluation == EvaluationMode::Exact) {
    EvalReport report;
    report.mean_return = exact_return(w.mdp, w.features, policy, w.true_theta);
    report.n_episodes = 0;
    report.seed = rng.seed();
    return report;
  }
  return evaluate_policy(w.mdp, w.features, policy, w.true_theta, config.eval_episodes, rng);
}

Vec checkpoint_theta(const json& checkpoint) {
  const auto xs = checkpoint.at("theta").get<std::vector<double>>();
  return Eigen::Map<const Vec>(xs.data(), static_cast<Eigen::Index>(xs.size()));
}

SweepOutcome run_sweep(const ExperimentConfig& config, const fs::path& out_dir, const SweepOptions& options) {
  config.validate();
  if (options.jobs < 1) throw std::invalid_argument("jobs must be at least 1");
  const OutputLayout layout{out_dir};
  fs::create_directories(out_dir);
  const Environment env(config);
  const ReturnRange range = return_range(env.world.mdp, env.world.features, env.world.true_theta);

  SweepOutcome outcome;
  outcome.results_path = layout.results();
  std::vector<ResultRow> rows = read_results_csv(layout.results());
  std::map<std::tuple<int, int, std::string>, ResultRow> done;
  for (const auto& r : rows) done[row_key(r)] = r;

  struct Cell {
    int setting_id;
    int seed;
  };
  std::vector<Cell> cells;
  for (int s = 0; s < config.n_settings(); ++s)
    for (int seed = 0; seed < config.n_seeds; ++seed) {
      bool complete = true;
      for (const auto& m : config.methods) {
        if (done.count({s, seed, m}))
          ++outcome.skipped;
        else
          complete = false;
      }
      if (!complete) cells.push_back({s, seed});
    }
  spdlog::info("sweep '{}': {} settings x {} seeds, {} cells to run, {} rows already present", config.name,
               config.n_settings(), config.n_seeds, cells.size(), outcome.skipped);

  // Single writer: rows are appended under the lock and flushed per cell.
  std::mutex writer;
  {
    const bool fresh = !fs::exists(layout.results()) || fs::file_size(layout.results()) == 0;
    if (!fresh) {
      std::ifstream in(layout.results(), std::ios::binary);
      in.seekg(-1, std::ios::end);
      char last = '\n';
      in.get(last);
      if (last != '\n') std::ofstream(layout.results(), std::ios::app) << '\n';
    } else {
      std::ofstream(layout.results()) << kResultsHeader << '\n';
    }
  }
  std::ofstream csv(layout.results(), std::ios::app);

  auto run_cell = [&](const Cell& cell) {
    const SweepSetting setting = config.setting(cell.setting_id);
    const auto generated = generate_cell_dataset(config, env, cell.setting_id, cell.seed);
    if (config.write_artifacts) {
      save_dataset(layout.dataset(cell.setting_id, cell.seed), generated.dataset);
      write_text(layout.metadata(cell.setting_id, cell.seed),
                 dataset_metadata(config, generated, cell.setting_id, cell.seed).dump(2) + "\n");
    }
    std::optional<double> irl_return;
    {
      std::lock_guard lock(writer);
      if (auto it = done.find({cell.setting_id, cell.seed, "irl"}); it != done.end())
        irl_return = it->second.mean_return;
    }
    // IRL first so the IRLEED row can carry the relative improvement.
    std::vector<std::string> order;
    if (config.runs("irl")) order.push_back("irl");
    if (config.runs("irleed")) order.push_back("irleed");
    for (const auto& method : order) {
      {
        std::lock_guard lock(writer);
        if (done.count({cell.setting_id, cell.seed, method})) continue;
      }
      Rng train_rng = Rng::derive(config.master_seed, static_cast<std::uint64_t>(cell.setting_id),
                                  static_cast<std::uint64_t>(cell.seed), "train-" + method);
      const auto model = train_method(config, env, method, generated.dataset, train_rng);
      // Both methods are scored on the same evaluation stream.
      Rng eval_rng = Rng::derive(config.master_seed, static_cast<std::uint64_t>(cell.setting_id),
                                 static_cast<std::uint64_t>(cell.seed), "eval");
      const auto report = evaluate_theta(config, env, model.theta, eval_rng);

      ResultRow row;
      row.setting_id = cell.setting_id;
      row.beta_mean = setting.precision_level;
      row.lambda = setting.accuracy_lambda;
      row.seed = cell.seed;
      row.method = method;
      row.mean_return = report.mean_return;
      row.std_error = report.std_error;
      row.wall_ms = options.record_timing ? std::round(model.wall_ms * 1000.0) / 1000.0 : 0.0;
      row.converged = model.converged;
      row.rel_improvement = std::numeric_limits<double>::quiet_NaN();
      if (method == "irl") {
        irl_return = report.mean_return;
      } else if (irl_return) {
        const auto imp = relative_improvement(report.mean_return, *irl_return, range);
        row.rel_improvement = imp.value;
        if (imp.shifted)
          spdlog::debug("setting {} seed {}: shifted improvement variant (IRL return {})", cell.setting_id,
                        cell.seed, *irl_return);
      }
      if (!model.converged)
        spdlog::warn("setting {} seed {} {}: training did not converge", cell.setting_id, cell.seed, method);

      if (config.write_artifacts) {
        json ckpt = model.checkpoint;
        ckpt["setting_id"] = cell.setting_id;
        ckpt["seed"] = cell.seed;
        ckpt["mean_return"] = report.mean_return;
        write_text(layout.checkpoint(cell.setting_id, cell.seed, method), ckpt.dump() + "\n");
        std::ostringstream pgm;
        write_grid_pgm(pgm, reward_grid_export(model.theta, config.grid));
        write_text(layout.heatmap(cell.setting_id, cell.seed, method), pgm.str());
      }
      std::lock_guard lock(writer);
      csv << format_result_row(row) << '\n';
      csv.flush();
      done[row_key(row)] = row;
      ++outcome.computed;
      spdlog::info("setting {} (beta mean {}, lambda {}) seed {} {}: return {:.4f}, {:.0f} ms", cell.setting_id,
                   setting.precision_level, setting.accuracy_lambda, cell.seed, method, row.mean_return,
                   model.wall_ms);
    }
  };

  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      try {
        run_cell(cells[i]);
      } catch (const std::exception& e) {
        const auto msg = fmt::format("setting {} seed {}: {}", cells[i].setting_id, cells[i].seed, e.what());
        spdlog::error("cell failed, skipping: {}", msg);
        std::lock_guard lock(writer);
        outcome.failures.push_back(msg);
      }
    }
  };
  const int n_threads = std::min<int>(options.jobs, std::max<int>(1, static_cast<int>(cells.size())));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  csv.close();

  outcome.rows.clear();
  for (const auto& [key, row] : done) outcome.rows.push_back(row);
  write_results_csv(layout.results(), outcome.rows);
  std::sort(outcome.failures.begin(), outcome.failures.end());
  if (!outcome.failures.empty()) spdlog::warn("{} cells failed", outcome.failures.size());
  return outcome;
}

SweepSummary summarize(const std::vector<ResultRow>& rows, const ReturnRange& range) {
  struct Acc {
    double beta_mean = 0.0, lambda = 0.0;
    std::vector<double> irl, irleed, wall;
  };
  std::map<int, Acc> by_setting;
  std::set<double> betas, lambdas;
  SweepSummary summary;
  for (const auto& r : rows) {
    auto& acc = by_setting[r.setting_id];
    acc.beta_mean = r.beta_mean;
    acc.lambda = r.lambda;
    (r.method == "irl" ? acc.irl : acc.irleed).push_back(r.mean_return);
    acc.wall.push_back(r.wall_ms);
    if (!r.converged) ++summary.n_unconverged;
  }
  double total = 0.0;
  for (const auto& [id, acc] : by_setting) {
    if (acc.irl.empty() || acc.irleed.empty()) continue;
    CellSummary c;
    c.setting_id = id;
    c.beta_mean = acc.beta_mean;
    c.lambda = acc.lambda;
    c.n_seeds = static_cast<int>(std::max(acc.irl.size(), acc.irleed.size()));
    c.irl_mean = mean_of(acc.irl);
    c.irl_std_error = std_error_of(acc.irl);
    c.irleed_mean = mean_of(acc.irleed);
    c.irleed_std_error = std_error_of(acc.irleed);
    const auto imp = relative_improvement(c.irleed_mean, c.irl_mean, range);
    c.rel_improvement = imp.value;
    c.shifted = imp.shifted;
    c.mean_wall_ms = mean_of(acc.wall);
    if (c.shifted) ++summary.n_shifted;
    total += c.rel_improvement;
    betas.insert(c.beta_mean);
    lambdas.insert(c.lambda);
    summary.cells.push_back(c);
  }
  summary.grand_mean_improvement = summary.cells.empty() ? 0.0 : total / static_cast<double>(summary.cells.size());
  summary.beta_means.assign(betas.begin(), betas.end());
  summary.lambdas.assign(lambdas.begin(), lambdas.end());
  return summary;
}

void write_heatmap_csv(std::ostream& out, const SweepSummary& summary) {
  std::map<std::pair<double, double>, double> value;
  for (const auto& c : summary.cells) value[{c.beta_mean, c.lambda}] = c.rel_improvement;
  std::string text = "beta_mean";
  for (double l : summary.lambdas) text += "," + format_real(l);
  text += "\n";
  for (double b : summary.beta_means) {
    text += format_real(b);
    for (double l : summary.lambdas) {
      auto it = value.find({b, l});
      text += "," + (it == value.end() ? std::string() : format_real(it->second));
    }
    text += "\n";
  }
  out << text;
}

void write_accuracy_slice_csv(std::ostream& out, const SweepSummary& summary, std::optional<double> beta_mean) {
  if (summary.beta_means.empty()) throw std::invalid_argument("summary has no cells");
  const double b = beta_mean.value_or(summary.beta_means.back());
  std::string text = "beta_mean,lambda,irl_mean_return,irl_std_error,irleed_mean_return,irleed_std_error\n";
  bool any = false;
  for (const auto& c : summary.cells) {
    if (c.beta_mean != b) continue;
    any = true;
    text += fmt::format("{},{},{},{},{},{}\n", format_real(b), format_real(c.lambda), format_real(c.irl_mean),
                        format_real(c.irl_std_error), format_real(c.irleed_mean), format_real(c.irleed_std_error));
  }
  if (!any) throw std::invalid_argument(fmt::format("no cells with beta mean {}", b));
  out << text;
}

json summary_to_json(const SweepSummary& summary) {
  json cells = json::array();
  for (const auto& c : summary.cells)
    cells.push_back({{"setting_id", c.setting_id},
                     {"beta_mean", c.beta_mean},
                     {"lambda", std::isinf(c.lambda) ? json("inf") : json(c.lambda)},
                     {"n_seeds", c.n_seeds},
                     {"irl_mean", c.irl_mean},
                     {"irl_std_error", c.irl_std_error},
                     {"irleed_mean", c.irleed_mean},
                     {"irleed_std_error", c.irleed_std_error},
                     {"rel_improvement", c.rel_improvement},
                     {"improvement_variant", c.shifted ? "shifted" : "ratio"},
                     {"mean_wall_ms", c.mean_wall_ms}});
  return {{"grand_mean_improvement", summary.grand_mean_improvement},
          {"n_cells", summary.cells.size()},
          {"n_shifted", summary.n_shifted},
          {"n_unconverged_rows", summary.n_unconverged},
          {"cells", cells}};
}

}  // namespace irleed
