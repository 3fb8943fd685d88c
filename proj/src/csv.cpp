#include "relcal/csv.hpp"

#include <charconv>
#include <fstream>
#include <system_error>

#include "relcal/errors.hpp"

namespace relcal::csv {

std::string format_double(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& s, const std::string& path, int line) {
  double v = 0.0;
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  const auto res = std::from_chars(begin, end, v);
  if (res.ec != std::errc{} || res.ptr != end)
    throw CsvError("cannot parse '" + s + "' as a number", path, line);
  return v;
}

long long parse_int(const std::string& s, const std::string& path, int line) {
  long long v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    throw CsvError("cannot parse '" + s + "' as an integer", path, line);
  return v;
}

int Table::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return static_cast<int>(i);
  return -1;
}

int Table::require_column(const std::string& name, const std::string& path) const {
  const int c = column(name);
  if (c < 0) throw CsvError("missing required column '" + name + "'", path, 1);
  return c;
}

double Table::value(std::size_t row, int col) const {
  return parse_double(rows[row][static_cast<std::size_t>(col)]);
}

namespace {

std::vector<std::string> split_line(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::vector<std::string> cells;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = line.find(',', start);
    if (pos == std::string::npos) {
      cells.push_back(line.substr(start));
      break;
    }
    cells.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return cells;
}

}  // namespace

Table read_file(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw CsvError("cannot open file", p.string(), 0);
  Table t;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || (line.size() == 1 && line[0] == '\r')) continue;
    auto cells = split_line(std::move(line));
    if (t.header.empty()) {
      t.header = std::move(cells);
    } else {
      if (cells.size() != t.header.size())
        throw CsvError("expected " + std::to_string(t.header.size()) + " cells, found " +
                           std::to_string(cells.size()),
                       p.string(), lineno);
      t.rows.push_back(std::move(cells));
    }
    line.clear();
  }
  if (t.header.empty()) throw CsvError("file has no header row", p.string(), 1);
  return t;
}

void write_file(const std::filesystem::path& p, const Table& t) {
  std::ofstream out(p, std::ios::trunc);
  if (!out) throw CsvError("cannot open file for writing", p.string(), 0);
  for (std::size_t i = 0; i < t.header.size(); ++i) {
    if (i) out << ',';
    out << t.header[i];
  }
  out << '\n';
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out << ',';
      out << row[i];
    }
    out << '\n';
  }
  if (!out) throw CsvError("write failed", p.string(), 0);
}

}  // namespace relcal::csv
