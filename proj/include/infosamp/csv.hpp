#pragma once
#include <string>
#include <vector>

namespace infosamp {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  int column(const std::string& name) const;  // -1 when absent
};

CsvTable read_csv(const std::string& path);

// rows are preformatted cells; numeric formatting is the caller's business so
// that report files stay byte-stable across runs
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

std::string fmt_full(double x);   // round-trippable, %.17g
std::string fmt_short(double x);  // report precision, %.10g

}  // namespace infosamp
