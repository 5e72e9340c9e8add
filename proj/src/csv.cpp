#include "infosamp/csv.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "infosamp/common.hpp"

namespace infosamp {

int CsvTable::column(const std::string& name) const {
  for (size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return static_cast<int>(i);
  return -1;
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("read_csv: cannot open " + path);
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) throw DataError("read_csv: empty file " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::stringstream hs(line);
  std::string cell;
  while (std::getline(hs, cell, ',')) t.header.push_back(cell);
  size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ls(line);
    while (std::getline(ls, cell, ',')) {
      try {
        size_t used = 0;
        row.push_back(std::stod(cell, &used));
        if (used != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw DataError("read_csv: " + path + " line " + std::to_string(lineno) +
                        ": non-numeric cell '" + cell + "'");
      }
    }
    if (row.size() != t.header.size())
      throw DataError("read_csv: " + path + " line " + std::to_string(lineno) +
                      ": expected " + std::to_string(t.header.size()) + " cells, got " +
                      std::to_string(row.size()));
    t.rows.push_back(std::move(row));
  }
  return t;
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
  std::ofstream out(path);
  if (!out) throw DataError("write_csv: cannot open " + path);
  for (size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << "\n";
  for (const auto& row : rows) {
    if (row.size() != header.size())
      throw DataError("write_csv: row width mismatch in " + path);
    for (size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
    out << "\n";
  }
  if (!out) throw DataError("write_csv: write failed for " + path);
}

std::string fmt_full(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string fmt_short(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", x);
  return buf;
}

}  // namespace infosamp
