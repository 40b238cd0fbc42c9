#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <istream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "core/error.hpp"
#include "core/objectives.hpp"
#include "core/types.hpp"

namespace core {

/// One sparse data row; feature indices are 1-based and strictly ascending,
/// matching the LibSVM text format.
struct SparseRow {
  std::vector<std::uint32_t> indices;
  std::vector<double> values;
};

struct LabeledDataset {
  std::vector<SparseRow> rows;
  std::vector<double> labels;
  std::uint32_t dim = 0;
  bool normalized = false;
};

namespace detail {

[[noreturn]] inline void parse_fail(std::size_t line, std::size_t col,
                                    const std::string& what) {
  throw Error("parse error at line " + std::to_string(line) + ", column " +
              std::to_string(col) + ": " + what);
}

/// Parses a double starting at offset pos; returns (value, one past end).
/// std::from_chars rejects a leading '+', which LibSVM labels often carry.
inline std::pair<double, std::size_t> parse_double(const std::string& s,
                                                   std::size_t pos,
                                                   std::size_t line) {
  std::size_t start = pos;
  if (start < s.size() && s[start] == '+') ++start;
  double value = 0.0;
  const auto res = std::from_chars(s.data() + start, s.data() + s.size(),
                                   value);
  if (res.ec != std::errc())
    parse_fail(line, pos + 1, "expected a number");
  return {value, static_cast<std::size_t>(res.ptr - s.data())};
}

inline std::pair<std::uint64_t, std::size_t> parse_index(const std::string& s,
                                                         std::size_t pos,
                                                         std::size_t line) {
  std::uint64_t value = 0;
  const auto res =
      std::from_chars(s.data() + pos, s.data() + s.size(), value);
  if (res.ec != std::errc())
    parse_fail(line, pos + 1, "expected a feature index");
  return {value, static_cast<std::size_t>(res.ptr - s.data())};
}

}  // namespace detail

/// Reads the LibSVM text format: one "label idx:val idx:val ..." row per
/// line, 1-based strictly ascending indices, '#' comment lines skipped.
/// Malformed input raises an error naming the 1-based line and column.
inline LabeledDataset parse_libsvm(
    std::istream& in, std::optional<std::uint32_t> dim = std::nullopt) {
  LabeledDataset ds;
  if (dim) ds.dim = *dim;
  std::string linebuf;
  std::size_t lineno = 0;
  while (std::getline(in, linebuf)) {
    ++lineno;
    if (!linebuf.empty() && linebuf.back() == '\r') linebuf.pop_back();
    std::size_t pos = linebuf.find_first_not_of(" \t");
    if (pos == std::string::npos || linebuf[pos] == '#') continue;

    const auto [label, after_label] =
        detail::parse_double(linebuf, pos, lineno);
    pos = after_label;
    SparseRow row;
    std::uint64_t prev_index = 0;
    while (true) {
      pos = linebuf.find_first_not_of(" \t", pos);
      if (pos == std::string::npos) break;
      if (linebuf[pos] == '#') break;
      const std::size_t idx_col = pos + 1;
      const auto [index, after_index] =
          detail::parse_index(linebuf, pos, lineno);
      if (after_index >= linebuf.size() || linebuf[after_index] != ':')
        detail::parse_fail(lineno, after_index + 1,
                           "expected ':' after feature index");
      if (index == 0)
        detail::parse_fail(lineno, idx_col, "feature indices are 1-based");
      if (index <= prev_index)
        detail::parse_fail(lineno, idx_col,
                           "feature indices must be strictly ascending");
      if (dim && index > *dim)
        detail::parse_fail(lineno, idx_col,
                           "feature index exceeds declared dimension");
      const auto [value, after_value] =
          detail::parse_double(linebuf, after_index + 1, lineno);
      pos = after_value;
      prev_index = index;
      row.indices.push_back(static_cast<std::uint32_t>(index));
      row.values.push_back(value);
      if (!dim)
        ds.dim = std::max(ds.dim, static_cast<std::uint32_t>(index));
    }
    ds.rows.push_back(std::move(row));
    ds.labels.push_back(label);
  }
  return ds;
}

inline LabeledDataset parse_libsvm_string(
    const std::string& text,
    std::optional<std::uint32_t> dim = std::nullopt) {
  std::istringstream in(text);
  return parse_libsvm(in, dim);
}

/// Inverse of parse_libsvm; 17 significant digits keep round-trips exact.
inline std::string serialize_libsvm(const LabeledDataset& ds) {
  std::ostringstream out;
  out.precision(17);
  for (std::size_t r = 0; r < ds.rows.size(); ++r) {
    out << ds.labels[r];
    for (std::size_t i = 0; i < ds.rows[r].indices.size(); ++i)
      out << ' ' << ds.rows[r].indices[i] << ':' << ds.rows[r].values[i];
    out << '\n';
  }
  return out.str();
}

/// Scales every nonzero row to unit Euclidean norm; zero rows untouched.
inline LabeledDataset normalize_rows(LabeledDataset ds) {
  for (auto& row : ds.rows) {
    double norm_sq = 0.0;
    for (const double v : row.values) norm_sq += v * v;
    if (norm_sq == 0.0) continue;
    const double inv = 1.0 / std::sqrt(norm_sq);
    for (double& v : row.values) v *= inv;
  }
  ds.normalized = true;
  return ds;
}

inline Vector row_dense(const LabeledDataset& ds, std::size_t r) {
  Vector out = Vector::Zero(ds.dim);
  const auto& row = ds.rows[r];
  for (std::size_t i = 0; i < row.indices.size(); ++i)
    out[row.indices[i] - 1] = row.values[i];
  return out;
}

inline Matrix dense_matrix(const LabeledDataset& ds) {
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(ds.rows.size()),
                            ds.dim);
  for (std::size_t r = 0; r < ds.rows.size(); ++r) {
    const auto& row = ds.rows[r];
    for (std::size_t i = 0; i < row.indices.size(); ++i)
      out(static_cast<Eigen::Index>(r), row.indices[i] - 1) = row.values[i];
  }
  return out;
}

/// Maps labels onto {-1, +1}: two-valued label sets map smaller to -1 and
/// larger to +1; anything else (e.g. ten digit classes) splits at 5.
inline std::vector<double> binary_labels(const LabeledDataset& ds) {
  std::set<double> distinct(ds.labels.begin(), ds.labels.end());
  std::vector<double> out;
  out.reserve(ds.labels.size());
  if (distinct.size() == 2) {
    const double lo = *distinct.begin();
    for (const double y : ds.labels) out.push_back(y == lo ? -1.0 : 1.0);
  } else {
    for (const double y : ds.labels) out.push_back(y < 5.0 ? -1.0 : 1.0);
  }
  return out;
}

/// Synthetic quadratic with the exact declared spectrum.
inline QuadraticObjective synth_quadratic(const SpectrumSpec& spec,
                                          std::uint32_t n_machines) {
  return QuadraticObjective(spec, n_machines);
}

inline std::string spectrum_csv(const SpectrumSpec& spec) {
  std::ostringstream out;
  out.precision(17);
  out << "index,eigenvalue\n";
  for (Eigen::Index i = 0; i < spec.eigenvalues.size(); ++i)
    out << (i + 1) << ',' << spec.eigenvalues[i] << '\n';
  return out.str();
}

}  // namespace core
