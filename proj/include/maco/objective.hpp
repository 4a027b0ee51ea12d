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

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "maco/dense.hpp"
#include "maco/error.hpp"
#include "maco/model.hpp"

namespace maco {

// f(L, R) = mu/2 (|L|_F^2 + |R|_F^2) + f_E + f_L + f_U, broken down by term.
struct ObjectiveValue {
  double total = 0.0;
  double reg = 0.0;
  double eq_part = 0.0;
  double lo_part = 0.0;
  double up_part = 0.0;
};

// Cached L_{i:} R_{:j} for every observed entry, indexed like
// ObservationSet::entries.
struct ResidualCache {
  std::vector<double> products;

  static ResidualCache compute(const FactorPair& f, const ObservationSet& obs) {
    ResidualCache c;
    c.products.resize(obs.entries.size());
    for (std::size_t e = 0; e < obs.entries.size(); ++e) {
      c.products[e] = product_entry(f, obs.entries[e].row, obs.entries[e].col);
    }
    return c;
  }
};

namespace detail {

inline void require_mu(double mu) {
  if (!(mu > 0.0) || !std::isfinite(mu)) {
    throw InputError("mu must be a positive finite number, got " + std::to_string(mu));
  }
}

inline double squared_norm(const DenseMatrix& m) {
  double s = 0.0;
  for (double v : m.data()) s += v * v;
  return s;
}

inline void accumulate_penalty(const Entry& e, double p, ObjectiveValue& out) {
  if (e.kind == ConstraintKind::Equality) {
    const double d = p - e.lo;
    out.eq_part += 0.5 * d * d;
    return;
  }
  if (p < e.lo) {
    const double d = e.lo - p;
    out.lo_part += 0.5 * d * d;
  } else if (p > e.hi) {
    const double d = p - e.hi;
    out.up_part += 0.5 * d * d;
  }
}

}  // namespace detail

// Objective from precomputed entry products (one per entry of obs).
inline ObjectiveValue eval_objective(const FactorPair& f, const ObservationSet& obs,
                                     const std::vector<double>& products, double mu) {
  detail::require_mu(mu);
  ObjectiveValue out;
  out.reg = 0.5 * mu * (detail::squared_norm(f.L) + detail::squared_norm(f.R));
  for (std::size_t e = 0; e < obs.entries.size(); ++e) {
    detail::accumulate_penalty(obs.entries[e], products[e], out);
  }
  out.total = out.reg + out.eq_part + out.lo_part + out.up_part;
  return out;
}

inline ObjectiveValue eval_objective(const FactorPair& f, const ObservationSet& obs, double mu) {
  detail::require_mu(mu);
  if (f.rows() != obs.rows || f.cols() != obs.cols) {
    throw InputError("eval_objective: factors are " + std::to_string(f.rows()) + "x" +
                     std::to_string(f.cols()) + " but observations are " +
                     std::to_string(obs.rows) + "x" + std::to_string(obs.cols));
  }
  return eval_objective(f, obs, ResidualCache::compute(f, obs).products, mu);
}

// Coordinate Lipschitz constant W_{i,v}(R) of f along L_{i,v}. Each observed
// entry contributes R_{v,j}^2 once whatever its kind: at most one hinge of a
// box is active at a time.
inline double row_lipschitz(const CsrIndex& index, const DenseMatrix& R, std::size_t i,
                            std::size_t v, double mu) {
  if (i >= index.rows || v >= R.rows()) throw InputError("row_lipschitz: index out of range");
  const auto rrow = R.row(v);
  double s = mu;
  for (std::size_t k = index.row_ptr[i]; k < index.row_ptr[i + 1]; ++k) {
    const double x = rrow[index.row_cols[k]];
    s += x * x;
  }
  return s;
}

// V_{v,j}(L), the column-side counterpart of row_lipschitz.
inline double col_lipschitz(const CsrIndex& index, const DenseMatrix& L, std::size_t v,
                            std::size_t j, double mu) {
  if (j >= index.cols || v >= L.cols()) throw InputError("col_lipschitz: index out of range");
  double s = mu;
  for (std::size_t k = index.col_ptr[j]; k < index.col_ptr[j + 1]; ++k) {
    const double x = L(index.col_rows[k], v);
    s += x * x;
  }
  return s;
}

// <grad_L f, E_{i,v}> using cached products. The caller keeps the cache
// consistent with f.
inline double row_directional_grad(const FactorPair& f, const ObservationSet& obs,
                                   const CsrIndex& index, const ResidualCache& residuals,
                                   std::size_t i, std::size_t v, double mu) {
  const auto rrow = f.R.row(v);
  double g = mu * f.L(i, v);
  for (std::size_t k = index.row_ptr[i]; k < index.row_ptr[i + 1]; ++k) {
    const std::size_t e = index.row_entries[k];
    g += obs.entries[e].slope(residuals.products[e]) * rrow[index.row_cols[k]];
  }
  return g;
}

inline double col_directional_grad(const FactorPair& f, const ObservationSet& obs,
                                   const CsrIndex& index, const ResidualCache& residuals,
                                   std::size_t v, std::size_t j, double mu) {
  double g = mu * f.R(v, j);
  for (std::size_t k = index.col_ptr[j]; k < index.col_ptr[j + 1]; ++k) {
    const std::size_t e = index.col_entries[k];
    g += obs.entries[e].slope(residuals.products[e]) * f.L(index.col_rows[k], v);
  }
  return g;
}

struct CoordinateUpdate {
  double grad = 0.0;
  double lip = 0.0;
  double delta = 0.0;
};

// Minimizer of the quadratic upper model grad*d + lip/2*d^2.
inline CoordinateUpdate coordinate_update(double grad, double lip) {
  if (!(lip > 0.0)) throw InputError("coordinate_update: Lipschitz constant must be positive");
  return {grad, lip, -grad / lip};
}

}  // namespace maco
