#include "relcal/scenario.hpp"

#include <charconv>
#include <fstream>
#include <limits>
#include <sstream>

#include "relcal/errors.hpp"

namespace relcal {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t");
  if (a == std::string::npos) return {};
  std::size_t b = s.find_last_not_of(" \t");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = s.find(',', start);
    if (pos == std::string::npos) {
      const std::string item = trim(s.substr(start));
      if (!item.empty()) out.push_back(item);
      break;
    }
    const std::string item = trim(s.substr(start, pos - start));
    if (!item.empty()) out.push_back(item);
    start = pos + 1;
  }
  return out;
}

double to_double(const std::string& s, const std::string& path, int line) {
  // from_chars does not accept "inf"; the scenario format allows it for y limits.
  if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    throw ConfigError("cannot parse '" + s + "' as a number", path, line);
  return v;
}

}  // namespace

bool KeyValueFile::has(const std::string& key) const { return entries.count(key) > 0; }

std::string KeyValueFile::get_string(const std::string& key,
                                     std::optional<std::string> fallback) const {
  const auto it = entries.find(key);
  if (it == entries.end()) {
    if (fallback) return *fallback;
    throw ConfigError("missing required key '" + key + "'", path, 0);
  }
  return it->second.value;
}

double KeyValueFile::get_double(const std::string& key, std::optional<double> fallback) const {
  const auto it = entries.find(key);
  if (it == entries.end()) {
    if (fallback) return *fallback;
    throw ConfigError("missing required key '" + key + "'", path, 0);
  }
  return to_double(it->second.value, path, it->second.line);
}

long long KeyValueFile::get_int(const std::string& key, std::optional<long long> fallback) const {
  const auto it = entries.find(key);
  if (it == entries.end()) {
    if (fallback) return *fallback;
    throw ConfigError("missing required key '" + key + "'", path, 0);
  }
  long long v = 0;
  const std::string& s = it->second.value;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    throw ConfigError("cannot parse '" + s + "' as an integer", path, it->second.line);
  return v;
}

bool KeyValueFile::get_bool(const std::string& key, std::optional<bool> fallback) const {
  const auto it = entries.find(key);
  if (it == entries.end()) {
    if (fallback) return *fallback;
    throw ConfigError("missing required key '" + key + "'", path, 0);
  }
  const std::string& s = it->second.value;
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw ConfigError("cannot parse '" + s + "' as a boolean", path, it->second.line);
}

std::vector<double> KeyValueFile::get_double_list(
    const std::string& key, std::optional<std::vector<double>> fallback) const {
  const auto it = entries.find(key);
  if (it == entries.end()) {
    if (fallback) return *fallback;
    throw ConfigError("missing required key '" + key + "'", path, 0);
  }
  std::vector<double> out;
  for (const std::string& item : split_list(it->second.value))
    out.push_back(to_double(item, path, it->second.line));
  return out;
}

std::vector<std::string> KeyValueFile::get_string_list(
    const std::string& key, std::optional<std::vector<std::string>> fallback) const {
  const auto it = entries.find(key);
  if (it == entries.end()) {
    if (fallback) return *fallback;
    throw ConfigError("missing required key '" + key + "'", path, 0);
  }
  return split_list(it->second.value);
}

void KeyValueFile::fail(const std::string& key, const std::string& msg) const {
  const auto it = entries.find(key);
  throw ConfigError("key '" + key + "': " + msg, path, it == entries.end() ? 0 : it->second.line);
}

KeyValueFile parse_key_value_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file", path, 0);
  KeyValueFile kv;
  kv.path = path;
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    if (t.front() == '[') {
      if (t.back() != ']') throw ConfigError("unterminated section header", path, lineno);
      section = trim(t.substr(1, t.size() - 2));
      if (section.empty()) throw ConfigError("empty section name", path, lineno);
      continue;
    }
    const std::size_t eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError("expected 'key = value'", path, lineno);
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (key.empty()) throw ConfigError("empty key", path, lineno);
    const std::string full = section.empty() ? key : section + "." + key;
    if (kv.entries.count(full)) throw ConfigError("duplicate key '" + full + "'", path, lineno);
    kv.entries[full] = {value, lineno};
  }
  return kv;
}

RunModes parse_run_modes(const std::string& name) {
  if (name == "orth" || name == "orthogonal") return RunModes::Orthogonal;
  if (name == "centered") return RunModes::Centered;
  if (name == "both") return RunModes::Both;
  if (name == "delta-bounded" || name == "delta_bounded") return RunModes::DeltaBounded;
  throw ConfigError("unknown mode '" + name + "' (expected orth, centered, both, delta-bounded)");
}

namespace {

VectorXd to_vector(const std::vector<double>& v) {
  VectorXd out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out(static_cast<Eigen::Index>(i)) = v[i];
  return out;
}

SensitivityConfig parse_sensitivity_block(const KeyValueFile& kv) {
  SensitivityConfig s;
  s.p_new = kv.get_double("sensitivity.p_new", s.p_new);
  s.t_max = kv.get_double("sensitivity.t_max", s.t_max);
  s.t_grid_size = static_cast<int>(kv.get_int("sensitivity.t_grid_size", s.t_grid_size));
  s.delta_bound = kv.get_double("sensitivity.delta_bound", s.delta_bound);
  s.lambda_scan = static_cast<int>(kv.get_int("sensitivity.lambda_scan", s.lambda_scan));
  s.root_tol = kv.get_double("sensitivity.root_tol", s.root_tol);
  s.validate();
  return s;
}

}  // namespace

ScenarioConfig parse_scenario(const std::string& path) {
  const KeyValueFile kv = parse_key_value_file(path);
  ScenarioConfig cfg;

  PopulationSpec& pop = cfg.population;
  if (kv.has("population.columns")) {
    pop.columns.clear();
    for (const std::string& name : kv.get_string_list("population.columns")) {
      const auto d = parse_column_dist(name);
      if (!d) kv.fail("population.columns", "unknown distribution '" + name + "'");
      pop.columns.push_back(*d);
    }
  } else {
    pop = PopulationSpec::twelve_mixed_default();
  }
  pop.n_pop = kv.get_int("population.n_pop", pop.n_pop);
  pop.expected_sample = kv.get_double("population.expected_sample", pop.expected_sample);
  pop.sigma = kv.get_double("population.sigma", pop.sigma);
  pop.y_low = kv.get_double("population.y_min", pop.y_low);
  pop.y_high = kv.get_double("population.y_max", pop.y_high);
  pop.seed = static_cast<std::uint64_t>(kv.get_int("population.seed", static_cast<long long>(pop.seed)));
  if (kv.has("population.important")) {
    pop.important.clear();
    for (double v : kv.get_double_list("population.important")) pop.important.push_back(v != 0.0);
  }
  if (kv.has("population.beta_intercept") || kv.has("population.beta")) {
    const double b0 = kv.get_double("population.beta_intercept", 1.0);
    const std::vector<double> rest = kv.get_double_list("population.beta");
    VectorXd beta(static_cast<Eigen::Index>(rest.size()) + 1);
    beta(0) = b0;
    beta.tail(static_cast<Eigen::Index>(rest.size())) = to_vector(rest);
    pop.beta = beta;
  }
  if (kv.has("population.gamma")) pop.gamma = to_vector(kv.get_double_list("population.gamma"));
  pop.validate();
  if (kv.has("population.target_override"))
    cfg.replication.target_override = kv.get_double_list("population.target_override");

  Priorities& prio = cfg.priorities;
  std::vector<double> defp;
  {
    const Priorities defaults = twelve_mixed_priorities();
    for (Eigen::Index i = 1; i < defaults.p.size(); ++i) defp.push_back(defaults.p(i));
  }
  const double p0 = kv.get_double("priorities.p_intercept", 3.0);
  const std::vector<double> prest = kv.get_double_list("priorities.p", defp);
  prio.p = VectorXd(static_cast<Eigen::Index>(prest.size()) + 1);
  prio.p(0) = p0;
  prio.p.tail(static_cast<Eigen::Index>(prest.size())) = to_vector(prest);
  prio.R = kv.get_double("priorities.r", 0.5);

  cfg.sensitivity = parse_sensitivity_block(kv);
  cfg.modes = parse_run_modes(kv.get_string("sensitivity.mode", std::string("both")));

  ReplicationConfig& rep = cfg.replication;
  rep.n_reps = static_cast<int>(kv.get_int("replication.n_reps", rep.n_reps));
  rep.master_seed =
      static_cast<std::uint64_t>(kv.get_int("replication.master_seed", static_cast<long long>(rep.master_seed)));
  rep.threads = static_cast<int>(kv.get_int("replication.threads", rep.threads));
  rep.t_eval = kv.get_double("replication.t_eval", 0.0);
  rep.recovery_column = static_cast<int>(kv.get_int("replication.recovery_column", 0));
  const std::string std_mode = kv.get_string("replication.standardize", std::string("sample"));
  if (std_mode == "sample")
    rep.sample_standardize = true;
  else if (std_mode == "none")
    rep.sample_standardize = false;
  else
    kv.fail("replication.standardize", "expected 'sample' or 'none'");
  if (kv.has("replication.calibrate_columns")) {
    const std::string raw = kv.get_string("replication.calibrate_columns");
    if (raw != "all") {
      for (double v : kv.get_double_list("replication.calibrate_columns"))
        rep.calibrate_columns.push_back(static_cast<int>(v));
    }
  }

  SweepSpec& sw = cfg.sweeps;
  sw.t_sweep = kv.get_bool("sweeps.t_sweep", true);
  sw.r_grid = kv.get_double_list("sweeps.r_grid", std::vector<double>{});
  sw.p0_grid = kv.get_double_list("sweeps.p0_grid", std::vector<double>{});
  sw.p_important_grid = kv.get_double_list("sweeps.p_important_grid", std::vector<double>{});
  sw.p_unimportant_grid = kv.get_double_list("sweeps.p_unimportant_grid", std::vector<double>{});

  return cfg;
}

std::string scenario_template() {
  return
      "# relcal simulation scenario\n"
      "[population]\n"
      "n_pop = 120000\n"
      "expected_sample = 1000\n"
      "seed = 4711\n"
      "sigma = 0.4\n"
      "y_min = 0\n"
      "y_max = 25\n"
      "# generators: normal chisq4 lognormal binary12 poisson25 gamma15\n"
      "columns = normal, normal, chisq4, chisq4, lognormal, lognormal, binary12, binary12, "
      "poisson25, poisson25, gamma15, gamma15\n"
      "important = 1, 0, 1, 0, 1, 0, 1, 0, 1, 0, 1, 0\n"
      "beta_intercept = 1.0\n"
      "beta = 1, 0.1, 1, 0.1, 1, 0.1, 1, 0.1, 1, 0.1, 1, 0.1\n"
      "gamma = 0, 0, 0, 0, 0.35, 0, 0, 0, 0.7, 0, 0.4, 0\n"
      "\n"
      "[priorities]\n"
      "p_intercept = 3.0\n"
      "p = 0.1, 0.01, 0.1, 0.01, 0.1, 0.01, 0.1, 0.01, 0.1, 0.01, 0.1, 0.01\n"
      "r = 0.5\n"
      "\n"
      "[sensitivity]\n"
      "p_new = 0.1\n"
      "t_max = 5000\n"
      "t_grid_size = 25\n"
      "mode = both            # orth | centered | both | delta-bounded\n"
      "delta_bound = 1\n"
      "lambda_scan = 512\n"
      "root_tol = 1e-9\n"
      "\n"
      "[replication]\n"
      "n_reps = 200\n"
      "master_seed = 1\n"
      "threads = 1\n"
      "calibrate_columns = all\n"
      "recovery_column = 0    # 1-based population column; 0 disables recovery\n"
      "t_eval = 0             # 0 = use sensitivity t_max\n"
      "\n"
      "[sweeps]\n"
      "t_sweep = true\n"
      "r_grid =               # e.g. 0.25, 0.5, 0.75\n"
      "p0_grid =\n"
      "p_important_grid =\n"
      "p_unimportant_grid =\n";
}

AnalysisConfig parse_analysis_config(const std::string& path) {
  const KeyValueFile kv = parse_key_value_file(path);
  AnalysisConfig cfg;
  cfg.p_intercept = kv.get_double("priorities.intercept");
  cfg.R = kv.get_double("priorities.r", 0.5);
  for (const auto& [key, entry] : kv.entries) {
    const std::string prefix = "priorities.";
    if (key.rfind(prefix, 0) != 0) continue;
    const std::string name = key.substr(prefix.size());
    if (name == "intercept" || name == "r") continue;
    cfg.column_priorities[name] = to_double(entry.value, path, entry.line);
  }
  cfg.sensitivity = parse_sensitivity_block(kv);
  cfg.modes = parse_run_modes(kv.get_string("sensitivity.mode", std::string("both")));
  return cfg;
}

std::string analysis_template() {
  return
      "# relcal analysis configuration\n"
      "# Priorities: one entry per auxiliary column (matching the data header),\n"
      "# plus the intercept priority and the weight-alteration priority r.\n"
      "[priorities]\n"
      "intercept = 3.0\n"
      "# <column name> = <priority>, e.g.\n"
      "# x1 = 0.1\n"
      "r = 0.5\n"
      "\n"
      "[sensitivity]\n"
      "p_new = 0.1\n"
      "t_max = 5000\n"
      "t_grid_size = 25\n"
      "mode = both            # orth | centered | both | delta-bounded\n"
      "delta_bound = 1\n"
      "lambda_scan = 512\n"
      "root_tol = 1e-9\n";
}

}  // namespace relcal
