// Copyright 2026 The maco Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "maco/dense.hpp"
#include "maco/error.hpp"

namespace maco {

enum class ConstraintKind : std::uint8_t { Equality, Lower, Upper, Box };

inline char kind_letter(ConstraintKind k) {
  switch (k) {
    case ConstraintKind::Equality: return 'E';
    case ConstraintKind::Lower: return 'L';
    case ConstraintKind::Upper: return 'U';
    case ConstraintKind::Box: return 'B';
  }
  return '?';
}

// One constrained entry of the target matrix.
//
// Every kind is stored as an interval [lo, hi]: an Equality keeps its value
// in both fields, a one-sided bound keeps the missing side at -inf / +inf.
// Use the named constructors; `validate` rejects anything else.
struct Entry {
  std::size_t row = 0;
  std::size_t col = 0;
  ConstraintKind kind = ConstraintKind::Equality;
  double lo = 0.0;
  double hi = 0.0;

  static Entry equality(std::size_t i, std::size_t j, double value) {
    return {i, j, ConstraintKind::Equality, value, value};
  }
  static Entry lower(std::size_t i, std::size_t j, double bound) {
    return {i, j, ConstraintKind::Lower, bound, std::numeric_limits<double>::infinity()};
  }
  static Entry upper(std::size_t i, std::size_t j, double bound) {
    return {i, j, ConstraintKind::Upper, -std::numeric_limits<double>::infinity(), bound};
  }
  static Entry box(std::size_t i, std::size_t j, double lo, double hi) {
    return {i, j, ConstraintKind::Box, lo, hi};
  }

  double value() const { return lo; }

  // d/dp of the entry's penalty at product p. Equality is the plain
  // residual; the hinges are active only when p strictly violates a bound.
  double slope(double p) const {
    if (kind == ConstraintKind::Equality) return p - lo;
    if (p < lo) return p - lo;
    if (p > hi) return p - hi;
    return 0.0;
  }

  friend bool operator==(const Entry&, const Entry&) = default;
};

struct ObservationSet {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<Entry> entries;

  std::size_t size() const { return entries.size(); }

  friend bool operator==(const ObservationSet&, const ObservationSet&) = default;
};

enum class ViolationKind {
  EmptyShape,
  IndexOutOfRange,
  DuplicateIndex,
  OverlapWithEquality,
  BoundOrder,
  NonFiniteBound,
  MalformedBounds,
};

inline const char* violation_name(ViolationKind k) {
  switch (k) {
    case ViolationKind::EmptyShape: return "EmptyShape";
    case ViolationKind::IndexOutOfRange: return "IndexOutOfRange";
    case ViolationKind::DuplicateIndex: return "DuplicateIndex";
    case ViolationKind::OverlapWithEquality: return "OverlapWithEquality";
    case ViolationKind::BoundOrder: return "BoundOrder";
    case ViolationKind::NonFiniteBound: return "NonFiniteBound";
    case ViolationKind::MalformedBounds: return "MalformedBounds";
  }
  return "Unknown";
}

struct Violation {
  ViolationKind kind;
  std::size_t row = 0;
  std::size_t col = 0;
  std::size_t entry = 0;  // position in ObservationSet::entries
};

struct ValidationReport {
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }
  bool contains(ViolationKind k, std::size_t i, std::size_t j) const {
    return std::any_of(violations.begin(), violations.end(), [&](const Violation& v) {
      return v.kind == k && v.row == i && v.col == j;
    });
  }

  // One line per violation, 1-based indices (as in the file formats).
  std::string describe() const {
    std::string out;
    for (const auto& v : violations) {
      out += violation_name(v.kind);
      out += " at (" + std::to_string(v.row + 1) + "," + std::to_string(v.col + 1) + ")";
      out += " record " + std::to_string(v.entry + 1) + "\n";
    }
    return out;
  }
};

// Checks every structural assumption the solver relies on. Never throws.
inline ValidationReport validate(const ObservationSet& obs) {
  ValidationReport report;
  auto add = [&](ViolationKind k, std::size_t e) {
    const Entry& en = obs.entries[e];
    report.violations.push_back({k, en.row, en.col, e});
  };
  if (obs.rows == 0 || obs.cols == 0) {
    report.violations.push_back({ViolationKind::EmptyShape, obs.rows, obs.cols, 0});
  }

  constexpr double inf = std::numeric_limits<double>::infinity();
  for (std::size_t e = 0; e < obs.entries.size(); ++e) {
    const Entry& en = obs.entries[e];
    if (en.row >= obs.rows || en.col >= obs.cols) add(ViolationKind::IndexOutOfRange, e);
    switch (en.kind) {
      case ConstraintKind::Equality:
        if (!std::isfinite(en.lo)) add(ViolationKind::NonFiniteBound, e);
        else if (en.hi != en.lo) add(ViolationKind::MalformedBounds, e);
        break;
      case ConstraintKind::Lower:
        if (!std::isfinite(en.lo)) add(ViolationKind::NonFiniteBound, e);
        if (en.hi != inf) add(ViolationKind::MalformedBounds, e);
        break;
      case ConstraintKind::Upper:
        if (!std::isfinite(en.hi)) add(ViolationKind::NonFiniteBound, e);
        if (en.lo != -inf) add(ViolationKind::MalformedBounds, e);
        break;
      case ConstraintKind::Box:
        if (!std::isfinite(en.lo) || !std::isfinite(en.hi)) add(ViolationKind::NonFiniteBound, e);
        else if (en.lo > en.hi) add(ViolationKind::BoundOrder, e);
        break;
    }
  }

  // Same (i, j) twice: an Equality clashing with a bound is reported as the
  // more specific overlap, everything else as a plain duplicate.
  std::vector<std::size_t> order(obs.entries.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const Entry& x = obs.entries[a];
    const Entry& y = obs.entries[b];
    return x.row != y.row ? x.row < y.row : (x.col != y.col ? x.col < y.col : a < b);
  });
  for (std::size_t k = 0; k < order.size();) {
    std::size_t end = k + 1;
    const Entry& first = obs.entries[order[k]];
    while (end < order.size() && obs.entries[order[end]].row == first.row &&
           obs.entries[order[end]].col == first.col) {
      ++end;
    }
    if (end - k > 1) {
      bool has_eq = false, has_ineq = false;
      for (std::size_t t = k; t < end; ++t) {
        (obs.entries[order[t]].kind == ConstraintKind::Equality ? has_eq : has_ineq) = true;
      }
      const auto kind = (has_eq && has_ineq) ? ViolationKind::OverlapWithEquality
                                             : ViolationKind::DuplicateIndex;
      for (std::size_t t = k + 1; t < end; ++t) add(kind, order[t]);
    }
    k = end;
  }
  return report;
}

inline void require_valid(const ObservationSet& obs) {
  auto report = validate(obs);
  if (!report.ok()) throw InputError("invalid observation set:\n" + report.describe());
}

// Row and column adjacency of the observed entries, CSR-style.
struct CsrIndex {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::size_t> row_ptr;      // rows + 1
  std::vector<std::size_t> row_cols;     // column of each slot, ascending within a row
  std::vector<std::size_t> row_entries;  // entry id of each slot
  std::vector<std::size_t> col_ptr;      // cols + 1
  std::vector<std::size_t> col_rows;
  std::vector<std::size_t> col_entries;

  std::size_t row_degree(std::size_t i) const { return row_ptr[i + 1] - row_ptr[i]; }
  std::size_t col_degree(std::size_t j) const { return col_ptr[j + 1] - col_ptr[j]; }
};

inline CsrIndex build_index(const ObservationSet& obs) {
  require_valid(obs);
  CsrIndex idx;
  idx.rows = obs.rows;
  idx.cols = obs.cols;
  const std::size_t nnz = obs.entries.size();

  idx.row_ptr.assign(obs.rows + 1, 0);
  idx.col_ptr.assign(obs.cols + 1, 0);
  for (const auto& e : obs.entries) {
    ++idx.row_ptr[e.row + 1];
    ++idx.col_ptr[e.col + 1];
  }
  std::partial_sum(idx.row_ptr.begin(), idx.row_ptr.end(), idx.row_ptr.begin());
  std::partial_sum(idx.col_ptr.begin(), idx.col_ptr.end(), idx.col_ptr.begin());

  // Stable bucket fill over entries sorted by (col, row) puts each row's
  // slots in ascending column order, and vice versa.
  std::vector<std::size_t> by_col(nnz), by_row(nnz);
  std::iota(by_col.begin(), by_col.end(), std::size_t{0});
  std::iota(by_row.begin(), by_row.end(), std::size_t{0});
  std::sort(by_col.begin(), by_col.end(), [&](std::size_t a, std::size_t b) {
    const auto& x = obs.entries[a];
    const auto& y = obs.entries[b];
    return x.col != y.col ? x.col < y.col : x.row < y.row;
  });
  std::sort(by_row.begin(), by_row.end(), [&](std::size_t a, std::size_t b) {
    const auto& x = obs.entries[a];
    const auto& y = obs.entries[b];
    return x.row != y.row ? x.row < y.row : x.col < y.col;
  });

  idx.row_cols.resize(nnz);
  idx.row_entries.resize(nnz);
  for (std::size_t k = 0; k < nnz; ++k) {
    idx.row_cols[k] = obs.entries[by_row[k]].col;
    idx.row_entries[k] = by_row[k];
  }
  idx.col_rows.resize(nnz);
  idx.col_entries.resize(nnz);
  for (std::size_t k = 0; k < nnz; ++k) {
    idx.col_rows[k] = obs.entries[by_col[k]].row;
    idx.col_entries[k] = by_col[k];
  }
  return idx;
}

// X = L * R with L m x r and R r x n.
struct FactorPair {
  DenseMatrix L;
  DenseMatrix R;

  FactorPair() = default;
  FactorPair(DenseMatrix l, DenseMatrix r) : L(std::move(l)), R(std::move(r)) {
    if (L.cols() != R.rows() || L.cols() == 0) {
      throw InputError("FactorPair: L has " + std::to_string(L.cols()) + " columns but R has " +
                       std::to_string(R.rows()) + " rows");
    }
  }
  FactorPair(std::size_t m, std::size_t n, std::size_t rank)
      : L(m, rank), R(rank, n) {
    if (rank == 0) throw InputError("FactorPair: rank must be positive");
  }

  std::size_t rows() const { return L.rows(); }
  std::size_t cols() const { return R.cols(); }
  std::size_t rank() const { return L.cols(); }

  bool all_finite() const { return L.all_finite() && R.all_finite(); }
  DenseMatrix product() const { return multiply(L, R); }

  friend bool operator==(const FactorPair&, const FactorPair&) = default;
};

inline double product_entry(const FactorPair& f, std::size_t i, std::size_t j) {
  if (i >= f.rows() || j >= f.cols()) {
    throw InputError("product_entry: (" + std::to_string(i) + "," + std::to_string(j) +
                     ") outside " + std::to_string(f.rows()) + "x" + std::to_string(f.cols()));
  }
  const std::size_t r = f.rank();
  const auto lrow = f.L.row(i);
  double s = 0.0;
  for (std::size_t v = 0; v < r; ++v) s += lrow[v] * f.R(v, j);
  return s;
}

}  // namespace maco
