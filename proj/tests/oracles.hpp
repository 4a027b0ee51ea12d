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

// Test-only reference computations. Nothing here calls into the solver's
// incremental machinery; everything is recomputed from dense products.

#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "maco/maco.hpp"

namespace maco::testing {

// Objective summed term by term from a full dense product.
inline double naive_objective(const FactorPair& f, const ObservationSet& obs, double mu) {
  const DenseMatrix x = multiply(f.L, f.R);
  double total = 0.0;
  for (double v : f.L.data()) total += 0.5 * mu * v * v;
  for (double v : f.R.data()) total += 0.5 * mu * v * v;
  for (const auto& e : obs.entries) {
    const double p = x(e.row, e.col);
    switch (e.kind) {
      case ConstraintKind::Equality: total += 0.5 * (p - e.lo) * (p - e.lo); break;
      case ConstraintKind::Lower: total += 0.5 * std::pow(std::max(0.0, e.lo - p), 2); break;
      case ConstraintKind::Upper: total += 0.5 * std::pow(std::max(0.0, p - e.hi), 2); break;
      case ConstraintKind::Box:
        total += 0.5 * std::pow(std::max(0.0, e.lo - p), 2);
        total += 0.5 * std::pow(std::max(0.0, p - e.hi), 2);
        break;
    }
  }
  return total;
}

// Central difference of the naive objective along L(i, v) or R(v, j).
inline double fd_grad_l(FactorPair f, const ObservationSet& obs, double mu, std::size_t i, std::size_t v,
                        double h = 1e-6) {
  const double x0 = f.L(i, v);
  f.L(i, v) = x0 + h;
  const double up = naive_objective(f, obs, mu);
  f.L(i, v) = x0 - h;
  const double down = naive_objective(f, obs, mu);
  return (up - down) / (2.0 * h);
}

inline double fd_grad_r(FactorPair f, const ObservationSet& obs, double mu, std::size_t v, std::size_t j,
                        double h = 1e-6) {
  const double x0 = f.R(v, j);
  f.R(v, j) = x0 + h;
  const double up = naive_objective(f, obs, mu);
  f.R(v, j) = x0 - h;
  const double down = naive_objective(f, obs, mu);
  return (up - down) / (2.0 * h);
}

inline FactorPair random_factors(std::size_t m, std::size_t n, std::size_t r, std::mt19937_64& rng,
                                 double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  FactorPair f(m, n, r);
  for (double& x : f.L.data()) x = u(rng);
  for (double& x : f.R.data()) x = u(rng);
  return f;
}

// Random observation set over a subset of cells with every constraint kind.
// When `products` is given, bounds are placed at least `gap` away from the
// product at each cell, on a random side.
inline ObservationSet random_observations(std::size_t m, std::size_t n, double density, std::mt19937_64& rng,
                                          const DenseMatrix* products = nullptr, double gap = 1e-3) {
  ObservationSet obs;
  obs.rows = m;
  obs.cols = n;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_real_distribution<double> val(-2.0, 2.0);
  std::uniform_int_distribution<int> kind(0, 3);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (u(rng) >= density) continue;
      const double p = products ? (*products)(i, j) : 0.0;
      auto away = [&](void) {
        double b = val(rng);
        if (products && std::abs(b - p) < gap) b = p + (b >= p ? gap : -gap) * 2.0;
        return b;
      };
      switch (kind(rng)) {
        case 0: obs.entries.push_back(Entry::equality(i, j, val(rng))); break;
        case 1: obs.entries.push_back(Entry::lower(i, j, away())); break;
        case 2: obs.entries.push_back(Entry::upper(i, j, away())); break;
        default: {
          double a = away(), b = away();
          if (a > b) std::swap(a, b);
          obs.entries.push_back(Entry::box(i, j, a, b));
        }
      }
    }
  }
  return obs;
}

}  // namespace maco::testing
