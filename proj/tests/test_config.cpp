#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>

#include "irleed/config.hpp"

using namespace irleed;
using nlohmann::json;

namespace {

std::string error_of(const std::string& toml) {
  try {
    parse_toml(toml);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

std::string config_error_of(const json& doc) {
  try {
    experiment_config_from_json(doc);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

std::filesystem::path config_path(const char* name) { return std::filesystem::path(IRLEED_CONFIG_DIR) / name; }

}  // namespace

TEST_SUITE("config") {
  TEST_CASE("TOML scalars, tables and dotted keys") {
    const auto doc = parse_toml(
        "# header\n"
        "name = \"a \\\"b\\\"\\n\"  # trailing\n"
        "lit = 'C:\\path'\n"
        "n = 1_000\n"
        "x = -2.5e-1\n"
        "flag = true\n"
        "off = false\n"
        "pinf = +inf\n"
        "ninf = -inf\n"
        "bad = nan\n"
        "u = \"\\u00e9\"\n"
        "a.b.c = 3\n"
        "\"quoted key\" = 1\n"
        "\n"
        "[env]\n"
        "width = 7\n"
        "[env.inner]\n"
        "k = 'v'\n");
    CHECK(doc.at("name") == "a \"b\"\n");
    CHECK(doc.at("lit") == "C:\\path");
    CHECK(doc.at("n").get<long long>() == 1000);
    CHECK(doc.at("x").get<double>() == -0.25);
    CHECK(doc.at("flag") == true);
    CHECK(doc.at("off") == false);
    CHECK(std::isinf(doc.at("pinf").get<double>()));
    CHECK(doc.at("pinf").get<double>() > 0);
    CHECK(doc.at("ninf").get<double>() < 0);
    CHECK(std::isnan(doc.at("bad").get<double>()));
    CHECK(doc.at("u") == "\xc3\xa9");
    CHECK(doc.at("a").at("b").at("c") == 3);
    CHECK(doc.at("quoted key") == 1);
    CHECK(doc.at("env").at("width") == 7);
    CHECK(doc.at("env").at("inner").at("k") == "v");
  }

  TEST_CASE("TOML arrays span lines and inline tables nest") {
    const auto doc = parse_toml(
        "xs = [\n"
        "  1.0,  # one\n"
        "  2,\n"
        "  inf,\n"
        "]\n"
        "empty = []\n"
        "t = { a = 1, b = { c = \"d\" } }\n"
        "e = {}\n");
    REQUIRE(doc.at("xs").size() == 3);
    CHECK(doc.at("xs")[0].get<double>() == 1.0);
    CHECK(doc.at("xs")[1].get<int>() == 2);
    CHECK(std::isinf(doc.at("xs")[2].get<double>()));
    CHECK(doc.at("empty").empty());
    CHECK(doc.at("t").at("b").at("c") == "d");
    CHECK(doc.at("e").is_object());
  }

  TEST_CASE("TOML errors name the line") {
    CHECK(error_of("a = 1\nb = \n") == "TOML line 2: expected a value");
    CHECK(error_of("a = 1\na = 2\n") == "TOML line 2: key 'a' defined twice");
    CHECK(error_of("[t]\n[t]\n") == "TOML line 2: table [t] defined twice");
    CHECK(error_of("x = \"open\n") == "TOML line 1: unterminated string");
    CHECK(error_of("x = 1 2\n") == "TOML line 1: unexpected character '2' after value");
    CHECK(error_of("\n\nx = [1 2]\n") == "TOML line 3: expected ',' or ']' in array");
    CHECK(error_of("x = 1__0\n") == "TOML line 1: misplaced '_' in number 1__0");
    CHECK(error_of("x = abc\n") == "TOML line 1: not a value: abc");
  }

  TEST_CASE("TOML dates and arrays of tables are rejected") {
    CHECK(error_of("d = 1979-05-27T07:32:00\n").find("dates and times are not supported") != std::string::npos);
    CHECK(error_of("[[runs]]\nx = 1\n") == "TOML line 1: arrays of tables are not supported");
    CHECK(error_of("s = \"\"\"multi\"\"\"\n") == "TOML line 1: multi-line strings are not supported");
  }

  TEST_CASE("desk.toml and desk.json describe the same experiment") {
    const auto a = load_experiment_config(config_path("desk.toml"));
    const auto b = load_experiment_config(config_path("desk.json"));
    CHECK(experiment_config_to_json(a) == experiment_config_to_json(b));
    CHECK(a.name == "desk");
    CHECK(a.n_settings() == 12);
    CHECK(a.n_seeds == 10);
    CHECK(a.irl.expectation.mode == ExpectationMode::Exact);
    CHECK(a.evaluation == EvaluationMode::MonteCarlo);
    CHECK(std::isinf(a.lambdas.back()));
  }

  TEST_CASE("shipped configs load and validate") {
    for (const char* name : {"desk.toml", "full.toml", "smoke.toml"}) {
      CAPTURE(name);
      CHECK_NOTHROW(load_experiment_config(config_path(name)).validate());
    }
    const auto full = load_experiment_config(config_path("full.toml"));
    CHECK(full.n_settings() == 121);
    CHECK(full.n_seeds == 100);
  }

  TEST_CASE("unknown keys are rejected with their section") {
    CHECK(config_error_of({{"bogus", 1}}) == "unknown key 'bogus' in config");
    CHECK(config_error_of({{"env", {{"widht", 5}}}}) == "unknown key 'widht' in env");
    CHECK(config_error_of({{"irleed", {{"lr", 0.1}}}}) == "unknown key 'lr' in irleed");
    CHECK(config_error_of({{"env", 3}}) == "'env' must be a table");
  }

  TEST_CASE("bad values are reported") {
    CHECK(config_error_of({{"sweep", {{"n_seeds", "ten"}}}}) == "bad value for 'sweep.n_seeds'");
    CHECK(config_error_of({{"sweep", {{"lambdas", {2.0, "big"}}}}}) ==
          "expected a number or \"inf\" in sweep.lambdas");
    CHECK(config_error_of({{"env", {{"gamma", 1.0}}}}) == "env.gamma must lie in (0, 1)");
    CHECK(config_error_of({{"sweep", {{"lambdas", {-1.0}}}}}) == "sweep.lambdas entries must be positive or inf");
    CHECK(config_error_of({{"methods", {"irl", "bc"}}}) == "unknown method 'bc'");
    CHECK(config_error_of({{"expectation", {{"mode", "sampled"}}}}) ==
          "expectation.mode must be exact or monte_carlo");
  }

  TEST_CASE("theta_init length must match the feature dimension") {
    const json doc = {{"env", {{"width", 3}, {"height", 3}}}, {"irl", {{"theta_init", {0.1, 0.2}}}}};
    CHECK(config_error_of(doc) == "irl.theta_init has length 2 but the feature dimension is 9");
    const json ok = {{"env", {{"width", 3}, {"height", 3}}},
                     {"irleed", {{"theta_init", std::vector<double>(9, 0.5)}}}};
    const auto c = experiment_config_from_json(ok);
    CHECK(c.irleed.theta_init.size() == 9);
    CHECK(c.irleed.theta_init(8) == 0.5);
  }

  TEST_CASE("JSON round trip preserves every field") {
    auto c = load_experiment_config(config_path("desk.toml"));
    c.irl.monotone_safeguard = false;
    c.irleed.freeze_beta = true;
    c.irleed.epsilon_l2 = 0.25;
    c.master_seed = 123456789012345ULL;
    const auto doc = experiment_config_to_json(c);
    const auto back = experiment_config_from_json(doc);
    CHECK(experiment_config_to_json(back) == doc);
    CHECK(back.master_seed == 123456789012345ULL);
    CHECK(doc.at("sweep").at("lambdas").back() == "inf");
    CHECK(std::isinf(back.lambdas.back()));
  }

  TEST_CASE("setting ids run row-major over beta mean then lambda") {
    const auto c = load_experiment_config(config_path("desk.toml"));
    for (int id = 0; id < c.n_settings(); ++id) {
      const auto s = c.setting(id);
      CHECK(s.precision_level == c.beta_means[id / c.lambdas.size()]);
      CHECK(s.accuracy_lambda == c.lambdas[id % c.lambdas.size()]);
      CHECK(s.n_demonstrators == 5);
      CHECK(s.n_trajectories_each == 40);
    }
    CHECK(c.setting(1).accuracy_lambda == 3.5);
    CHECK(c.setting(4).precision_level == 2.0);
    CHECK_THROWS_AS(c.setting(12), ConfigError);
    CHECK_THROWS_AS(c.setting(-1), ConfigError);
  }

  TEST_CASE("missing file and malformed JSON are config errors") {
    CHECK_THROWS_AS(load_experiment_config(config_path("nope.toml")), ConfigError);
    const auto dir = std::filesystem::path(IRLEED_TEST_TMP) / "config";
    std::filesystem::create_directories(dir);
    const auto path = dir / "broken.json";
    std::ofstream(path) << "{\"name\": ";
    CHECK_THROWS_AS(load_experiment_config(path), ConfigError);
  }

  TEST_CASE("runs reports configured methods") {
    ExperimentConfig c;
    c.methods = {"irleed"};
    CHECK(c.runs("irleed"));
    CHECK_FALSE(c.runs("irl"));
  }
}
