#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "relcal/simgen.hpp"

namespace relcal {

// Flat `key = value` configuration with [section] headers and '#' comments.
struct KeyValueFile {
  struct Entry {
    std::string value;
    int line = 0;
  };
  std::string path;
  std::map<std::string, Entry> entries;  // "section.key" -> entry

  bool has(const std::string& key) const;
  std::string get_string(const std::string& key, std::optional<std::string> fallback = {}) const;
  double get_double(const std::string& key, std::optional<double> fallback = {}) const;
  long long get_int(const std::string& key, std::optional<long long> fallback = {}) const;
  bool get_bool(const std::string& key, std::optional<bool> fallback = {}) const;
  std::vector<double> get_double_list(const std::string& key,
                                      std::optional<std::vector<double>> fallback = {}) const;
  std::vector<std::string> get_string_list(const std::string& key,
                                           std::optional<std::vector<std::string>> fallback = {}) const;
  [[noreturn]] void fail(const std::string& key, const std::string& msg) const;
};

KeyValueFile parse_key_value_file(const std::string& path);

enum class RunModes { Orthogonal, Centered, Both, DeltaBounded };
RunModes parse_run_modes(const std::string& name);

struct SweepSpec {
  bool t_sweep = true;
  std::vector<double> r_grid;
  std::vector<double> p0_grid;
  std::vector<double> p_important_grid;
  std::vector<double> p_unimportant_grid;
};

struct ScenarioConfig {
  PopulationSpec population;
  Priorities priorities;
  SensitivityConfig sensitivity;
  ReplicationConfig replication;
  SweepSpec sweeps;
  RunModes modes = RunModes::Both;
};

ScenarioConfig parse_scenario(const std::string& path);
std::string scenario_template();

// Configuration for the survey-data pipeline (calibrate + sensitivity on CSV
// inputs): per-column priorities by name plus the sensitivity block.
struct AnalysisConfig {
  double p_intercept = 0.0;
  std::map<std::string, double> column_priorities;
  double R = 0.5;
  SensitivityConfig sensitivity;
  RunModes modes = RunModes::Both;
};

AnalysisConfig parse_analysis_config(const std::string& path);
std::string analysis_template();

}  // namespace relcal
