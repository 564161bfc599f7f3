#include "irleed/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace irleed {

namespace {

using nlohmann::json;

class TomlReader {
 public:
  explicit TomlReader(std::string_view text) : text_(text) {}

  json parse() {
    json root = json::object();
    json* table = &root;
    while (true) {
      skip_blank_lines();
      if (at_end()) break;
      if (peek() == '[') {
        table = &open_table(root);
      } else {
        parse_key_value(*table);
      }
      expect_line_end();
    }
    return root;
  }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
  int line_ = 1;
  std::set<std::string> defined_tables_;

  [[noreturn]] void fail(const std::string& what) const {
    std::ostringstream os;
    os << "TOML line " << line_ << ": " << what;
    throw ConfigError(os.str());
  }

  bool at_end() const { return pos_ >= text_.size(); }
  char peek() const { return at_end() ? '\0' : text_[pos_]; }
  char get() {
    if (at_end()) fail("unexpected end of input");
    const char c = text_[pos_++];
    if (c == '\n') ++line_;
    return c;
  }

  void skip_spaces() {
    while (!at_end() && (peek() == ' ' || peek() == '\t')) ++pos_;
  }
  void skip_comment() {
    if (peek() == '#')
      while (!at_end() && peek() != '\n') ++pos_;
  }
  void skip_blank_lines() {
    while (!at_end()) {
      skip_spaces();
      skip_comment();
      if (peek() == '\r') ++pos_;
      if (peek() == '\n') {
        get();
        continue;
      }
      break;
    }
  }
  void expect_line_end() {
    skip_spaces();
    skip_comment();
    if (peek() == '\r') ++pos_;
    if (at_end()) return;
    if (peek() != '\n') fail(std::string("unexpected character '") + peek() + "' after value");
    get();
  }

  static bool bare_key_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
  }

  std::string parse_simple_key() {
    skip_spaces();
    if (peek() == '"') return parse_basic_string();
    if (peek() == '\'') return parse_literal_string();
    std::string key;
    while (!at_end() && bare_key_char(peek())) key += get();
    if (key.empty()) fail("expected a key");
    return key;
  }

  std::vector<std::string> parse_key_path() {
    std::vector<std::string> path{parse_simple_key()};
    skip_spaces();
    while (peek() == '.') {
      get();
      path.push_back(parse_simple_key());
      skip_spaces();
    }
    return path;
  }

  json& descend(json& node, const std::string& key) {
    json& child = node[key];
    if (child.is_null()) child = json::object();
    if (!child.is_object()) fail("key '" + key + "' is not a table");
    return child;
  }

  json& open_table(json& root) {
    get();
    if (peek() == '[') fail("arrays of tables are not supported");
    const auto path = parse_key_path();
    if (get() != ']') fail("expected ']' after table name");
    std::string full;
    json* node = &root;
    for (const auto& key : path) {
      full += (full.empty() ? "" : ".") + key;
      node = &descend(*node, key);
    }
    if (!defined_tables_.insert(full).second) fail("table [" + full + "] defined twice");
    return *node;
  }

  void parse_key_value(json& table) {
    const auto path = parse_key_path();
    if (get() != '=') fail("expected '=' after key");
    skip_spaces();
    json* node = &table;
    for (std::size_t i = 0; i + 1 < path.size(); ++i) node = &descend(*node, path[i]);
    if (node->contains(path.back())) fail("key '" + path.back() + "' defined twice");
    (*node)[path.back()] = parse_value();
  }

  json parse_value() {
    const char c = peek();
    if (c == '"') {
      if (text_.substr(pos_, 3) == "\"\"\"") fail("multi-line strings are not supported");
      return parse_basic_string();
    }
    if (c == '\'') return parse_literal_string();
    if (c == '[') return parse_array();
    if (c == '{') return parse_inline_table();
    if (text_.substr(pos_, 4) == "true" && !bare_key_char(pos_ + 4 < text_.size() ? text_[pos_ + 4] : ' ')) {
      pos_ += 4;
      return true;
    }
    if (text_.substr(pos_, 5) == "false" && !bare_key_char(pos_ + 5 < text_.size() ? text_[pos_ + 5] : ' ')) {
      pos_ += 5;
      return false;
    }
    return parse_number();
  }

  std::string parse_basic_string() {
    get();
    std::string out;
    while (true) {
      if (at_end() || peek() == '\n') fail("unterminated string");
      const char c = get();
      if (c == '"') return out;
      if (c != '\\') {
        out += c;
        continue;
      }
      const char e = get();
      switch (e) {
        case '"': out += '"'; break;
        case '\\': out += '\\'; break;
        case 'n': out += '\n'; break;
        case 't': out += '\t'; break;
        case 'r': out += '\r'; break;
        case 'b': out += '\b'; break;
        case 'f': out += '\f'; break;
        case 'u': append_utf8(out, parse_hex(4)); break;
        case 'U': append_utf8(out, parse_hex(8)); break;
        default: fail(std::string("unknown escape \\") + e);
      }
    }
  }

  unsigned long parse_hex(int digits) {
    std::string hex;
    for (int i = 0; i < digits; ++i) hex += get();
    std::size_t used = 0;
    unsigned long value = 0;
    try {
      value = std::stoul(hex, &used, 16);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != hex.size()) fail("bad unicode escape");
    return value;
  }

  static void append_utf8(std::string& out, unsigned long cp) {
    if (cp < 0x80) {
      out += static_cast<char>(cp);
    } else if (cp < 0x800) {
      out += static_cast<char>(0xC0 | (cp >> 6));
      out += static_cast<char>(0x80 | (cp & 0x3F));
    } else if (cp < 0x10000) {
      out += static_cast<char>(0xE0 | (cp >> 12));
      out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
      out += static_cast<char>(0x80 | (cp & 0x3F));
    } else {
      out += static_cast<char>(0xF0 | (cp >> 18));
      out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
      out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
      out += static_cast<char>(0x80 | (cp & 0x3F));
    }
  }

  std::string parse_literal_string() {
    get();
    std::string out;
    while (true) {
      if (at_end() || peek() == '\n') fail("unterminated string");
      const char c = get();
      if (c == '\'') return out;
      out += c;
    }
  }

  void skip_array_space() {
    while (!at_end()) {
      skip_blank_lines();
      if (peek() != '#') break;
    }
  }

  json parse_array() {
    get();
    json arr = json::array();
    while (true) {
      skip_array_space();
      if (peek() == ']') {
        get();
        return arr;
      }
      arr.push_back(parse_value());
      skip_array_space();
      const char c = get();
      if (c == ']') return arr;
      if (c != ',') fail("expected ',' or ']' in array");
    }
  }

  json parse_inline_table() {
    get();
    json table = json::object();
    skip_spaces();
    if (peek() == '}') {
      get();
      return table;
    }
    while (true) {
      parse_key_value(table);
      skip_spaces();
      const char c = get();
      if (c == '}') return table;
      if (c != ',') fail("expected ',' or '}' in inline table");
    }
  }

  json parse_number() {
    std::string token;
    while (!at_end() && (bare_key_char(peek()) || peek() == '.' || peek() == '+' || peek() == ':')) token += get();
    if (token.empty()) fail("expected a value");
    std::string body = token;
    double sign = 1.0;
    if (body[0] == '+' || body[0] == '-') {
      sign = body[0] == '-' ? -1.0 : 1.0;
      body.erase(0, 1);
    }
    if (body == "inf") return sign * std::numeric_limits<double>::infinity();
    if (body == "nan") return std::numeric_limits<double>::quiet_NaN();
    if (token.find(':') != std::string::npos) fail("dates and times are not supported: " + token);
    std::string digits;
    for (std::size_t i = 0; i < token.size(); ++i) {
      if (token[i] != '_') {
        digits += token[i];
        continue;
      }
      const bool ok = i > 0 && i + 1 < token.size() && std::isdigit(static_cast<unsigned char>(token[i - 1])) &&
                      std::isdigit(static_cast<unsigned char>(token[i + 1]));
      if (!ok) fail("misplaced '_' in number " + token);
    }
    const bool is_float = digits.find_first_of(".eE") != std::string::npos;
    std::size_t used = 0;
    try {
      if (is_float) {
        const double v = std::stod(digits, &used);
        if (used == digits.size()) return v;
      } else {
        const long long v = std::stoll(digits, &used, 10);
        if (used == digits.size()) return v;
      }
    } catch (const std::exception&) {
    }
    fail("not a value: " + token);
  }
};

void reject_unknown(const json& doc, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!doc.is_object()) throw ConfigError("'" + where + "' must be a table");
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    bool known = false;
    for (const char* a : allowed) known = known || it.key() == a;
    if (!known) throw ConfigError("unknown key '" + it.key() + "' in " + where);
  }
}

template <typename T>
void read(const json& doc, const char* key, T& out, const std::string& where) {
  if (!doc.contains(key)) return;
  try {
    out = doc.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("bad value for '" + where + "." + key + "'");
  }
}

double read_real(const json& v, const std::string& where) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "inf" || s == "+inf" || s == "infinity") return std::numeric_limits<double>::infinity();
  }
  throw ConfigError("expected a number or \"inf\" in " + where);
}

std::vector<double> read_reals(const json& v, const std::string& where) {
  if (!v.is_array()) throw ConfigError("expected an array in " + where);
  std::vector<double> out;
  for (const auto& x : v) out.push_back(read_real(x, where));
  return out;
}

void read_theta_init(const json& doc, double& value, Vec& vec, const std::string& where) {
  if (!doc.contains("theta_init")) return;
  const auto& v = doc.at("theta_init");
  if (v.is_number()) {
    value = v.get<double>();
    vec = Vec();
    return;
  }
  const auto xs = read_reals(v, where + ".theta_init");
  vec = Eigen::Map<const Vec>(xs.data(), static_cast<Eigen::Index>(xs.size()));
}

json reals_to_json(const std::vector<double>& xs) {
  json arr = json::array();
  for (double x : xs) arr.push_back(std::isinf(x) ? json("inf") : json(x));
  return arr;
}

json theta_init_to_json(double value, const Vec& vec) {
  if (vec.size() == 0) return value;
  return std::vector<double>(vec.data(), vec.data() + vec.size());
}

const char* expectation_name(ExpectationMode mode) {
  return mode == ExpectationMode::Exact ? "exact" : "monte_carlo";
}

}  // namespace

nlohmann::json parse_toml(std::string_view text) { return TomlReader(text).parse(); }

nlohmann::json load_config_document(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  if (path.extension() == ".json") {
    try {
      return json::parse(buffer.str());
    } catch (const json::parse_error& e) {
      throw ConfigError(path.string() + ": " + e.what());
    }
  }
  try {
    return parse_toml(buffer.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

ExperimentConfig::ExperimentConfig() : lambdas{2.0, 3.5, 6.0, std::numeric_limits<double>::infinity()} {}

void ExperimentConfig::validate() const {
  auto check = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError(what);
  };
  check(!(gamma <= 0.0 || gamma >= 1.0), "env.gamma must lie in (0, 1)");
  check(max_horizon >= 1, "env.max_horizon must be at least 1");
  check(!beta_means.empty(), "sweep.beta_means must not be empty");
  check(!lambdas.empty(), "sweep.lambdas must not be empty");
  for (double b : beta_means) check(b > 0.0 && std::isfinite(b), "sweep.beta_means entries must be positive");
  for (double l : lambdas) check(l > 0.0, "sweep.lambdas entries must be positive or inf");
  check(n_demonstrators >= 1, "sweep.n_demonstrators must be at least 1");
  check(n_trajectories >= 1, "sweep.n_trajectories must be at least 1");
  check(n_seeds >= 1, "sweep.n_seeds must be at least 1");
  check(!methods.empty(), "methods must not be empty");
  for (const auto& m : methods) check(m == "irl" || m == "irleed", "unknown method '" + m + "'");
  check(eval_episodes >= 1, "evaluation.n_episodes must be at least 1");
  check(!out_dir.empty(), "out_dir must not be empty");
  try {
    irl.validate();
    irleed.validate();
    build_gridworld(grid, gamma, max_horizon);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  const int k = grid.width * grid.height;
  auto check_dim = [&](const Vec& theta, const char* where) {
    if (theta.size() == 0 || theta.size() == k) return;
    std::ostringstream os;
    os << where << ".theta_init has length " << theta.size() << " but the feature dimension is " << k;
    throw ConfigError(os.str());
  };
  check_dim(irl.theta_init, "irl");
  check_dim(irleed.theta_init, "irleed");
}

SweepSetting ExperimentConfig::setting(int setting_id) const {
  if (setting_id < 0 || setting_id >= n_settings()) throw ConfigError("setting id out of range");
  SweepSetting s;
  s.precision_level = beta_means[setting_id / lambdas.size()];
  s.accuracy_lambda = lambdas[setting_id % lambdas.size()];
  s.n_demonstrators = n_demonstrators;
  s.n_trajectories_each = n_trajectories;
  return s;
}

bool ExperimentConfig::runs(std::string_view method) const {
  for (const auto& m : methods)
    if (m == method) return true;
  return false;
}

ExperimentConfig experiment_config_from_json(const nlohmann::json& doc) {
  ExperimentConfig c;
  reject_unknown(doc, "config",
                 {"name", "master_seed", "out_dir", "methods", "write_artifacts", "env", "sweep", "expectation",
                  "evaluation", "vi", "irl", "irleed"});
  read(doc, "name", c.name, "config");
  read(doc, "master_seed", c.master_seed, "config");
  read(doc, "out_dir", c.out_dir, "config");
  read(doc, "methods", c.methods, "config");
  read(doc, "write_artifacts", c.write_artifacts, "config");

  if (doc.contains("env")) {
    const auto& env = doc.at("env");
    reject_unknown(env, "env",
                   {"width", "height", "goal_states", "goal_reward", "step_reward", "slip", "gamma", "max_horizon"});
    read(env, "width", c.grid.width, "env");
    read(env, "height", c.grid.height, "env");
    read(env, "goal_states", c.grid.goal_states, "env");
    read(env, "goal_reward", c.grid.goal_reward, "env");
    read(env, "step_reward", c.grid.step_reward, "env");
    read(env, "slip", c.grid.slip, "env");
    read(env, "gamma", c.gamma, "env");
    read(env, "max_horizon", c.max_horizon, "env");
  }
  if (doc.contains("sweep")) {
    const auto& sw = doc.at("sweep");
    reject_unknown(sw, "sweep", {"beta_means", "lambdas", "n_demonstrators", "n_trajectories", "n_seeds"});
    if (sw.contains("beta_means")) c.beta_means = read_reals(sw.at("beta_means"), "sweep.beta_means");
    if (sw.contains("lambdas")) c.lambdas = read_reals(sw.at("lambdas"), "sweep.lambdas");
    read(sw, "n_demonstrators", c.n_demonstrators, "sweep");
    read(sw, "n_trajectories", c.n_trajectories, "sweep");
    read(sw, "n_seeds", c.n_seeds, "sweep");
  }
  if (doc.contains("expectation")) {
    const auto& ex = doc.at("expectation");
    reject_unknown(ex, "expectation", {"mode", "n_episodes"});
    std::string mode = expectation_name(c.irl.expectation.mode);
    read(ex, "mode", mode, "expectation");
    if (mode != "exact" && mode != "monte_carlo") throw ConfigError("expectation.mode must be exact or monte_carlo");
    ExpectationConfig e;
    e.mode = mode == "exact" ? ExpectationMode::Exact : ExpectationMode::MonteCarlo;
    read(ex, "n_episodes", e.n_episodes, "expectation");
    c.irl.expectation = e;
    c.irleed.expectation = e;
  }
  if (doc.contains("evaluation")) {
    const auto& ev = doc.at("evaluation");
    reject_unknown(ev, "evaluation", {"mode", "n_episodes"});
    std::string mode = c.evaluation == EvaluationMode::Exact ? "exact" : "monte_carlo";
    read(ev, "mode", mode, "evaluation");
    if (mode != "exact" && mode != "monte_carlo") throw ConfigError("evaluation.mode must be exact or monte_carlo");
    c.evaluation = mode == "exact" ? EvaluationMode::Exact : EvaluationMode::MonteCarlo;
    read(ev, "n_episodes", c.eval_episodes, "evaluation");
  }
  if (doc.contains("vi")) {
    const auto& vi = doc.at("vi");
    reject_unknown(vi, "vi", {"tol", "max_iters"});
    SoftViOptions o;
    read(vi, "tol", o.tol, "vi");
    read(vi, "max_iters", o.max_iters, "vi");
    c.irl.vi = o;
    c.irleed.vi = o;
  }
  if (doc.contains("irl")) {
    const auto& irl = doc.at("irl");
    reject_unknown(irl, "irl", {"lr_theta", "tol_theta", "theta_init", "max_outer_steps", "monotone_safeguard"});
    read(irl, "lr_theta", c.irl.lr_theta, "irl");
    read(irl, "tol_theta", c.irl.tol_theta, "irl");
    read_theta_init(irl, c.irl.theta_init_value, c.irl.theta_init, "irl");
    read(irl, "max_outer_steps", c.irl.max_outer_steps, "irl");
    read(irl, "monotone_safeguard", c.irl.monotone_safeguard, "irl");
  }
  if (doc.contains("irleed")) {
    const auto& ir = doc.at("irleed");
    reject_unknown(ir, "irleed",
                   {"lr_theta", "lr_epsilon", "lr_beta", "tol", "outer_iterations", "eps_beta_steps",
                    "max_theta_steps", "beta_init", "theta_init", "epsilon_l2", "freeze_epsilon", "freeze_beta",
                    "monotone_safeguard"});
    read(ir, "lr_theta", c.irleed.lr_theta, "irleed");
    read(ir, "lr_epsilon", c.irleed.lr_epsilon, "irleed");
    read(ir, "lr_beta", c.irleed.lr_beta, "irleed");
    read(ir, "tol", c.irleed.tol, "irleed");
    read(ir, "outer_iterations", c.irleed.outer_iterations, "irleed");
    read(ir, "eps_beta_steps", c.irleed.eps_beta_steps, "irleed");
    read(ir, "max_theta_steps", c.irleed.max_theta_steps, "irleed");
    read(ir, "beta_init", c.irleed.beta_init, "irleed");
    read_theta_init(ir, c.irleed.theta_init_value, c.irleed.theta_init, "irleed");
    read(ir, "epsilon_l2", c.irleed.epsilon_l2, "irleed");
    read(ir, "freeze_epsilon", c.irleed.freeze_epsilon, "irleed");
    read(ir, "freeze_beta", c.irleed.freeze_beta, "irleed");
    read(ir, "monotone_safeguard", c.irleed.monotone_safeguard, "irleed");
  }
  c.validate();
  return c;
}

nlohmann::json experiment_config_to_json(const ExperimentConfig& c) {
  json doc;
  doc["name"] = c.name;
  doc["master_seed"] = c.master_seed;
  doc["out_dir"] = c.out_dir;
  doc["methods"] = c.methods;
  doc["write_artifacts"] = c.write_artifacts;
  doc["env"] = gridworld_spec_to_json(c.grid);
  doc["env"]["gamma"] = c.gamma;
  doc["env"]["max_horizon"] = c.max_horizon;
  doc["sweep"] = {{"beta_means", reals_to_json(c.beta_means)},
                  {"lambdas", reals_to_json(c.lambdas)},
                  {"n_demonstrators", c.n_demonstrators},
                  {"n_trajectories", c.n_trajectories},
                  {"n_seeds", c.n_seeds}};
  doc["expectation"] = {{"mode", expectation_name(c.irl.expectation.mode)},
                        {"n_episodes", c.irl.expectation.n_episodes}};
  doc["evaluation"] = {{"mode", c.evaluation == EvaluationMode::Exact ? "exact" : "monte_carlo"},
                       {"n_episodes", c.eval_episodes}};
  doc["vi"] = {{"tol", c.irl.vi.tol}, {"max_iters", c.irl.vi.max_iters}};
  doc["irl"] = {{"lr_theta", c.irl.lr_theta},
                {"tol_theta", c.irl.tol_theta},
                {"theta_init", theta_init_to_json(c.irl.theta_init_value, c.irl.theta_init)},
                {"max_outer_steps", c.irl.max_outer_steps},
                {"monotone_safeguard", c.irl.monotone_safeguard}};
  const auto& e = c.irleed;
  doc["irleed"] = {{"lr_theta", e.lr_theta},
                   {"lr_epsilon", e.lr_epsilon},
                   {"lr_beta", e.lr_beta},
                   {"tol", e.tol},
                   {"outer_iterations", e.outer_iterations},
                   {"eps_beta_steps", e.eps_beta_steps},
                   {"max_theta_steps", e.max_theta_steps},
                   {"beta_init", e.beta_init},
                   {"theta_init", theta_init_to_json(e.theta_init_value, e.theta_init)},
                   {"epsilon_l2", e.epsilon_l2},
                   {"freeze_epsilon", e.freeze_epsilon},
                   {"freeze_beta", e.freeze_beta},
                   {"monotone_safeguard", e.monotone_safeguard}};
  return doc;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  return experiment_config_from_json(load_config_document(path));
}

}  // namespace irleed
