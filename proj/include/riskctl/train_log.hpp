#pragma once

#include <sstream>
#include <string>
#include <vector>

namespace riskctl {

// Column-oriented experiment record, written as comma-separated rows.
struct TrainLog {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  void add(std::vector<double> row) { rows.push_back(std::move(row)); }
  bool empty() const { return rows.empty(); }

  std::vector<double> column(const std::string& name) const {
    std::vector<double> out;
    for (std::size_t j = 0; j < columns.size(); ++j)
      if (columns[j] == name)
        for (const auto& r : rows) out.push_back(r[j]);
    return out;
  }

  std::string to_csv() const {
    std::ostringstream out;
    out.precision(17);
    for (std::size_t j = 0; j < columns.size(); ++j) out << (j ? "," : "") << columns[j];
    out << "\n";
    for (const auto& r : rows) {
      for (std::size_t j = 0; j < r.size(); ++j) out << (j ? "," : "") << r[j];
      out << "\n";
    }
    return out.str();
  }
};

}  // namespace riskctl
