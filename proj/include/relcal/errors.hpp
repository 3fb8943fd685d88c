#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace relcal {

struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct DegenerateInputError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Design matrix without full column rank.  Column indices are 0-based design
// positions (0 = intercept); duplicate_pairs lists detected collinear pairs.
struct RankDeficiencyError : std::runtime_error {
  std::vector<int> columns;
  std::vector<std::pair<int, int>> duplicate_pairs;
  explicit RankDeficiencyError(const std::string& msg, std::vector<int> cols = {},
                               std::vector<std::pair<int, int>> pairs = {})
      : std::runtime_error(msg), columns(std::move(cols)), duplicate_pairs(std::move(pairs)) {}
};

// Shift lambda2 too close to a value where lambda2*I + Q is singular.
struct SingularShiftError : std::domain_error {
  using std::domain_error::domain_error;
};

// The norm equation has no bracketed root; `trace` summarises the scan.
struct NoRootError : std::runtime_error {
  std::string trace;
  NoRootError(const std::string& msg, std::string scan_trace = {})
      : std::runtime_error(msg), trace(std::move(scan_trace)) {}
};

struct DiscardRateError : std::runtime_error {
  int discarded = 0;
  int total = 0;
  DiscardRateError(const std::string& msg, int nd, int nt)
      : std::runtime_error(msg), discarded(nd), total(nt) {}
};

struct ConfigError : std::runtime_error {
  std::string path;
  int line = 0;
  ConfigError(const std::string& msg, std::string file = {}, int ln = 0)
      : std::runtime_error(file.empty() ? msg : file + ":" + std::to_string(ln) + ": " + msg),
        path(std::move(file)),
        line(ln) {}
};

struct CsvError : std::runtime_error {
  std::string path;
  int line = 0;
  CsvError(const std::string& msg, std::string file = {}, int ln = 0)
      : std::runtime_error(file.empty() ? msg : file + ":" + std::to_string(ln) + ": " + msg),
        path(std::move(file)),
        line(ln) {}
};

}  // namespace relcal
