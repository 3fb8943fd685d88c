#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace relcal::csv {

// Shortest representation that parses back to the same double.
std::string format_double(double v);
double parse_double(const std::string& s, const std::string& path = {}, int line = 0);
long long parse_int(const std::string& s, const std::string& path = {}, int line = 0);

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const;           // -1 if absent
  int require_column(const std::string& name, const std::string& path) const;
  double value(std::size_t row, int col) const;
};

Table read_file(const std::filesystem::path& p);
void write_file(const std::filesystem::path& p, const Table& t);

}  // namespace relcal::csv
