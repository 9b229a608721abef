#pragma once

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "lvm/numerics.hpp"

namespace lvm {

/// N x P observation matrix with optional structure annotations: contiguous
/// column groups (multi-view models) and per-row cluster ids (hierarchical
/// models).
struct Dataset {
  Matrix observations;
  std::vector<Index> column_groups;  // sizes of contiguous views; empty = ungrouped
  std::vector<Index> row_clusters;   // cluster id per row; empty = unclustered

  Index rows() const { return observations.rows(); }
  Index cols() const { return observations.cols(); }

  void validate() const {
    require(observations.rows() >= 1 && observations.cols() >= 1, "observations",
            "must be a non-empty matrix");
    require_finite(observations, "observations");
    if (!column_groups.empty()) {
      Index total = 0;
      for (std::size_t g = 0; g < column_groups.size(); ++g) {
        require(column_groups[g] >= 1, "column_groups[" + std::to_string(g) + "]",
                "group sizes must be positive");
        total += column_groups[g];
      }
      require(total == observations.cols(), "column_groups",
              "group sizes must sum to the column count");
    }
    if (!row_clusters.empty()) {
      require(static_cast<Index>(row_clusters.size()) == observations.rows(),
              "row_clusters", "needs one cluster id per row");
      for (std::size_t i = 0; i < row_clusters.size(); ++i)
        require(row_clusters[i] >= 0, "row_clusters[" + std::to_string(i) + "]",
                "cluster ids must be nonnegative");
    }
  }

  /// Observations per dimension, N/P. Below 1 the usual estimators are
  /// underdetermined; callers only report it.
  double measurement_density() const {
    return static_cast<double>(rows()) / static_cast<double>(cols());
  }

  /// View g as a column block (requires column_groups).
  Matrix view(std::size_t g) const {
    require(g < column_groups.size(), "view", "group index out of range");
    Index start = 0;
    for (std::size_t j = 0; j < g; ++j) start += column_groups[j];
    return observations.middleCols(start, column_groups[g]);
  }
};

/// Shortest decimal that round-trips a double (17 significant digits).
inline std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

inline void write_csv(std::ostream& os, const Matrix& m,
                      const std::vector<std::string>& header) {
  require(static_cast<Index>(header.size()) == m.cols(), "header",
          "needs one name per column");
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (j > 0) os << ',';
    os << header[j];
  }
  os << '\n';
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (j > 0) os << ',';
      os << format_double(m(i, j));
    }
    os << '\n';
  }
}

/// Parse a headered numeric CSV. Errors carry 1-based row/column locations so
/// the CLI can point at the offending cell.
inline Dataset read_csv(std::istream& is, const std::string& name = "csv") {
  std::string line;
  if (!std::getline(is, line))
    throw ValidationError(name, "file is empty");
  const auto split = [](const std::string& s) {
    std::vector<std::string> cells;
    std::string cell;
    std::stringstream ss(s);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!s.empty() && s.back() == ',') cells.emplace_back();
    return cells;
  };
  const std::size_t ncol = split(line).size();
  require(ncol >= 1, name, "header row has no columns");

  std::vector<double> values;
  std::size_t nrow = 0;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != ncol)
      throw ValidationError(name + " row " + std::to_string(lineno),
                            "expected " + std::to_string(ncol) + " columns, got " +
                                std::to_string(cells.size()));
    for (std::size_t j = 0; j < cells.size(); ++j) {
      const std::string& cell = cells[j];
      double x = 0.0;
      const char* begin = cell.data();
      const char* end = begin + cell.size();
      while (begin < end && (*begin == ' ' || *begin == '\t')) ++begin;
      auto [ptr, ec] = std::from_chars(begin, end, x);
      if (ec != std::errc{} || ptr != end)
        throw ValidationError(name + " row " + std::to_string(lineno) + " column " +
                                  std::to_string(j + 1),
                              "cell '" + cell + "' is not a number");
      values.push_back(x);
    }
    ++nrow;
  }
  require(nrow >= 1, name, "no data rows");
  Matrix m(static_cast<Index>(nrow), static_cast<Index>(ncol));
  for (std::size_t i = 0; i < nrow; ++i)
    for (std::size_t j = 0; j < ncol; ++j)
      m(static_cast<Index>(i), static_cast<Index>(j)) = values[i * ncol + j];
  Dataset d;
  d.observations = std::move(m);
  d.validate();
  return d;
}

inline Dataset read_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError(path, "cannot open file");
  return read_csv(in, path);
}

}  // namespace lvm
