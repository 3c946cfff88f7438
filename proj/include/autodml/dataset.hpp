#pragma once

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "autodml/errors.hpp"
#include "autodml/rng.hpp"

namespace autodml {

// One observation per row: outcome y, binary treatment d, binary instrument z,
// covariate row x of fixed width. Value type; safe to share read-only.
struct IVDataset {
  Eigen::VectorXd y;
  Eigen::VectorXi d;
  Eigen::VectorXi z;
  Eigen::MatrixXd x;  // n x k

  Eigen::Index n() const { return y.size(); }
  Eigen::Index covariate_width() const { return x.cols(); }

  void validate() const {
    const Eigen::Index rows = y.size();
    if (rows < 1) throw ValidationError("dataset is empty");
    if (d.size() != rows || z.size() != rows || x.rows() != rows)
      throw ValidationError("dataset columns have mismatched lengths");
    if (x.cols() < 1) throw ValidationError("covariate width must be >= 1");
    for (Eigen::Index i = 0; i < rows; ++i) {
      if (!std::isfinite(y[i]))
        throw ValidationError("non-finite outcome at row " + std::to_string(i + 1));
      if (d[i] != 0 && d[i] != 1)
        throw ValidationError("treatment not in {0,1} at row " + std::to_string(i + 1));
      if (z[i] != 0 && z[i] != 1)
        throw ValidationError("instrument not in {0,1} at row " + std::to_string(i + 1));
      for (Eigen::Index j = 0; j < x.cols(); ++j)
        if (!std::isfinite(x(i, j)))
          throw ValidationError("non-finite covariate at row " + std::to_string(i + 1) +
                                ", column " + std::to_string(j + 1));
    }
  }

  IVDataset subset(const std::vector<int>& idx) const {
    IVDataset out;
    const auto m = static_cast<Eigen::Index>(idx.size());
    out.y.resize(m);
    out.d.resize(m);
    out.z.resize(m);
    out.x.resize(m, x.cols());
    for (Eigen::Index i = 0; i < m; ++i) {
      out.y[i] = y[idx[static_cast<std::size_t>(i)]];
      out.d[i] = d[idx[static_cast<std::size_t>(i)]];
      out.z[i] = z[idx[static_cast<std::size_t>(i)]];
      out.x.row(i) = x.row(idx[static_cast<std::size_t>(i)]);
    }
    return out;
  }
};

// Column mapping for CSV ingestion. Covariate order in `x` fixes the
// covariate order of the dataset.
struct CsvSchema {
  std::string y;
  std::string d;
  std::string z;
  std::vector<std::string> x;
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

inline std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t");
  return s.substr(a, b - a + 1);
}

inline double parse_double(const std::string& cell, std::size_t row, const std::string& col) {
  const std::string t = trim(cell);
  double value = 0.0;
  const char* first = t.data();
  const char* last = t.data() + t.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last)
    throw ParseError("non-numeric cell at row " + std::to_string(row) + ", column '" + col +
                     "': '" + t + "'");
  if (!std::isfinite(value))
    throw ValidationError("non-finite value at row " + std::to_string(row) + ", column '" +
                          col + "'");
  return value;
}

// d and z accept only the literal tokens 0 and 1; anything else (including
// truthy strings) is rejected so causal columns cannot be silently coerced.
inline int parse_binary(const std::string& cell, std::size_t row, const std::string& col) {
  const std::string t = trim(cell);
  if (t == "0") return 0;
  if (t == "1") return 1;
  throw ValidationError("column '" + col + "' must be 0 or 1; got '" + t + "' at row " +
                        std::to_string(row));
}

}  // namespace detail

// Parses a comma-separated UTF-8 file with a mandatory header row. Row order
// is preserved.
inline IVDataset load_csv(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open data file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty file: " + path);
  const auto header = detail::split_csv_line(line);

  auto find_col = [&](const std::string& name) -> std::size_t {
    for (std::size_t j = 0; j < header.size(); ++j)
      if (detail::trim(header[j]) == name) return j;
    throw SchemaError("missing column '" + name + "' in " + path);
  };

  const std::size_t yc = find_col(schema.y);
  const std::size_t dc = find_col(schema.d);
  const std::size_t zc = find_col(schema.z);
  std::vector<std::size_t> xc;
  xc.reserve(schema.x.size());
  for (const auto& name : schema.x) xc.push_back(find_col(name));
  if (xc.empty()) throw SchemaError("schema must name at least one covariate column");

  std::vector<double> ys;
  std::vector<int> ds, zs;
  std::vector<double> xs;
  std::size_t row = 1;  // data rows are 1-based in messages
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != header.size())
      throw ParseError("row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                       " cells, expected " + std::to_string(header.size()));
    ys.push_back(detail::parse_double(cells[yc], row, schema.y));
    ds.push_back(detail::parse_binary(cells[dc], row, schema.d));
    zs.push_back(detail::parse_binary(cells[zc], row, schema.z));
    for (std::size_t j = 0; j < xc.size(); ++j)
      xs.push_back(detail::parse_double(cells[xc[j]], row, schema.x[j]));
    ++row;
  }

  IVDataset data;
  const auto n = static_cast<Eigen::Index>(ys.size());
  const auto k = static_cast<Eigen::Index>(xc.size());
  data.y = Eigen::Map<Eigen::VectorXd>(ys.data(), n);
  data.d = Eigen::Map<Eigen::VectorXi>(ds.data(), n);
  data.z = Eigen::Map<Eigen::VectorXi>(zs.data(), n);
  data.x.resize(n, k);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < k; ++j) data.x(i, j) = xs[static_cast<std::size_t>(i * k + j)];
  data.validate();
  return data;
}

// Writes values with 17 significant digits so load_csv(save_csv(.)) is the
// identity on the dataset.
inline void save_csv(const IVDataset& data, const std::string& path, const CsvSchema& schema) {
  if (static_cast<Eigen::Index>(schema.x.size()) != data.covariate_width())
    throw SchemaError("schema covariate count does not match dataset width");
  std::ofstream out(path);
  if (!out) throw DataError("cannot write data file: " + path);
  out << schema.y << ',' << schema.d << ',' << schema.z;
  for (const auto& name : schema.x) out << ',' << name;
  out << '\n';
  char buf[64];
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g", data.y[i]);
    out << buf << ',' << data.d[i] << ',' << data.z[i];
    for (Eigen::Index j = 0; j < data.covariate_width(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", data.x(i, j));
      out << ',' << buf;
    }
    out << '\n';
  }
}

// Balanced random fold assignment: shuffle indices with the seeded generator,
// then deal round-robin. Sizes differ by at most one and the assignment is a
// pure function of (n, folds, seed).
struct FoldPartition {
  std::vector<int> assignment;  // fold id in [0, folds) per observation
  int folds = 0;

  std::vector<std::vector<int>> fold_indices() const {
    std::vector<std::vector<int>> out(static_cast<std::size_t>(folds));
    for (std::size_t i = 0; i < assignment.size(); ++i)
      out[static_cast<std::size_t>(assignment[i])].push_back(static_cast<int>(i));
    return out;
  }

  std::vector<int> complement_indices(int fold) const {
    std::vector<int> out;
    out.reserve(assignment.size());
    for (std::size_t i = 0; i < assignment.size(); ++i)
      if (assignment[i] != fold) out.push_back(static_cast<int>(i));
    return out;
  }
};

inline FoldPartition partition_folds(int n, int folds, std::uint64_t seed) {
  if (folds < 2) throw ConfigError("fold count must be >= 2");
  if (n < 2 * folds)
    throw ConfigError("need at least 2 observations per fold: n=" + std::to_string(n) +
                      ", folds=" + std::to_string(folds));
  std::vector<int> order(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  Rng rng(seed);
  rng.shuffle(order);
  FoldPartition part;
  part.folds = folds;
  part.assignment.assign(static_cast<std::size_t>(n), 0);
  for (int i = 0; i < n; ++i)
    part.assignment[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = i % folds;
  return part;
}

}  // namespace autodml
