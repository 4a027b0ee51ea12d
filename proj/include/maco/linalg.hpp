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
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "maco/dense.hpp"
#include "maco/error.hpp"

namespace maco {

inline double fro_norm(const DenseMatrix& x) {
  double s = 0.0;
  for (double v : x.data()) s += v * v;
  return std::sqrt(s);
}

inline double fro_dist(const DenseMatrix& x, const DenseMatrix& y) {
  if (x.rows() != y.rows() || x.cols() != y.cols()) {
    throw InputError("fro_dist: shapes " + std::to_string(x.rows()) + "x" + std::to_string(x.cols()) +
                     " and " + std::to_string(y.rows()) + "x" + std::to_string(y.cols()) + " differ");
  }
  double s = 0.0;
  const auto a = x.data(), b = y.data();
  for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  return std::sqrt(s);
}

// X = U diag(sigma) Vt with k = min(m, n), sigma non-increasing.
struct SvdResult {
  DenseMatrix U;   // m x k
  std::vector<double> sigma;
  DenseMatrix Vt;  // k x n

  DenseMatrix reconstruct(std::size_t r) const {
    r = std::min(r, sigma.size());
    DenseMatrix out(U.rows(), Vt.cols());
    for (std::size_t v = 0; v < r; ++v) {
      if (sigma[v] == 0.0) continue;
      const auto vrow = Vt.row(v);
      for (std::size_t i = 0; i < U.rows(); ++i) {
        const double a = U(i, v) * sigma[v];
        if (a == 0.0) continue;
        auto orow = out.row(i);
        for (std::size_t j = 0; j < vrow.size(); ++j) orow[j] += a * vrow[j];
      }
    }
    return out;
  }
};

namespace detail {

// One-sided Jacobi (Hestenes) on a tall matrix stored column by column.
// Returns the rotated columns (U * Sigma) and the accumulated V.
inline void hestenes(std::vector<std::vector<double>>& cols, std::vector<std::vector<double>>& v,
                     double fro_sq) {
  const std::size_t n = cols.size();
  const std::size_t m = n ? cols[0].size() : 0;
  v.assign(n, std::vector<double>(n, 0.0));
  for (std::size_t k = 0; k < n; ++k) v[k][k] = 1.0;

  constexpr int kMaxSweeps = 60;
  constexpr double kPairTol = 1e-15;
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    double off_sq = 0.0;
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        auto& a = cols[p];
        auto& b = cols[q];
        double alpha = 0.0, beta = 0.0, gamma = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
          alpha += a[i] * a[i];
          beta += b[i] * b[i];
          gamma += a[i] * b[i];
        }
        off_sq += 2.0 * gamma * gamma;
        if (gamma == 0.0 || std::abs(gamma) <= kPairTol * std::sqrt(alpha * beta)) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (std::size_t i = 0; i < m; ++i) {
          const double x = a[i], y = b[i];
          a[i] = c * x - s * y;
          b[i] = s * x + c * y;
        }
        auto& vp = v[p];
        auto& vq = v[q];
        for (std::size_t i = 0; i < n; ++i) {
          const double x = vp[i], y = vq[i];
          vp[i] = c * x - s * y;
          vq[i] = s * x + c * y;
        }
      }
    }
    // Off-diagonal Frobenius mass of the Gram matrix, measured during the
    // sweep, relative to |X|_F^2.
    if (!rotated || std::sqrt(off_sq) < 1e-12 * fro_sq) break;
  }
}

// Completes column k of u (m x k) to a unit vector orthogonal to the
// columns already set in `done`.
inline void complete_basis(DenseMatrix& u, std::size_t k, const std::vector<bool>& done) {
  const std::size_t m = u.rows();
  for (std::size_t e = 0; e < m; ++e) {
    std::vector<double> x(m, 0.0);
    x[e] = 1.0;
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t c = 0; c < u.cols(); ++c) {
        if (!done[c]) continue;
        double d = 0.0;
        for (std::size_t i = 0; i < m; ++i) d += u(i, c) * x[i];
        for (std::size_t i = 0; i < m; ++i) x[i] -= d * u(i, c);
      }
    }
    double nrm = 0.0;
    for (double t : x) nrm += t * t;
    nrm = std::sqrt(nrm);
    if (nrm > 1e-6) {
      for (std::size_t i = 0; i < m; ++i) u(i, k) = x[i] / nrm;
      return;
    }
  }
}

}  // namespace detail

// Thin SVD by one-sided Jacobi. Meant for oracle-sized matrices (up to
// roughly 1024 on the short side). Left singular vectors are signed so that
// their first nonzero entry is positive.
inline SvdResult svd(const DenseMatrix& x) {
  if (x.rows() == 0 || x.cols() == 0) throw InputError("svd: empty matrix");
  if (!x.all_finite()) throw InputError("svd: matrix has non-finite entries");

  const bool transpose = x.rows() < x.cols();
  const DenseMatrix a = transpose ? x.transposed() : x;
  const std::size_t m = a.rows(), n = a.cols();  // m >= n

  std::vector<std::vector<double>> cols(n, std::vector<double>(m));
  double fro_sq = 0.0;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      cols[j][i] = a(i, j);
      fro_sq += a(i, j) * a(i, j);
    }
  std::vector<std::vector<double>> v;
  detail::hestenes(cols, v, fro_sq);

  std::vector<double> norms(n);
  for (std::size_t j = 0; j < n; ++j) {
    double s = 0.0;
    for (double t : cols[j]) s += t * t;
    norms[j] = std::sqrt(s);
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t p, std::size_t q) { return norms[p] > norms[q]; });

  // Columns with negligible norm carry no direction; their left vectors are
  // rebuilt as an orthonormal completion.
  const double tiny = norms.empty() ? 0.0 : norms[order[0]] * 1e-15 * static_cast<double>(m);
  DenseMatrix u(m, n), vt(n, n);
  std::vector<double> sigma(n);
  std::vector<bool> done(n, false);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t src = order[k];
    sigma[k] = norms[src];
    for (std::size_t j = 0; j < n; ++j) vt(k, j) = v[src][j];
    if (sigma[k] > tiny && sigma[k] > 0.0) {
      for (std::size_t i = 0; i < m; ++i) u(i, k) = cols[src][i] / sigma[k];
      done[k] = true;
    }
  }
  for (std::size_t k = 0; k < n; ++k) {
    if (!done[k]) {
      detail::complete_basis(u, k, done);
      done[k] = true;
    }
  }

  for (std::size_t k = 0; k < n; ++k) {
    std::size_t first = 0;
    while (first < m && std::abs(u(first, k)) < 1e-14) ++first;
    if (first < m && u(first, k) < 0.0) {
      for (std::size_t i = 0; i < m; ++i) u(i, k) = -u(i, k);
      for (std::size_t j = 0; j < n; ++j) vt(k, j) = -vt(k, j);
    }
  }

  if (!transpose) return {std::move(u), std::move(sigma), std::move(vt)};
  // x = a^T = V S U^T.
  SvdResult out{vt.transposed(), std::move(sigma), u.transposed()};
  for (std::size_t k = 0; k < out.sigma.size(); ++k) {
    std::size_t first = 0;
    while (first < out.U.rows() && std::abs(out.U(first, k)) < 1e-14) ++first;
    if (first < out.U.rows() && out.U(first, k) < 0.0) {
      for (std::size_t i = 0; i < out.U.rows(); ++i) out.U(i, k) = -out.U(i, k);
      for (std::size_t j = 0; j < out.Vt.cols(); ++j) out.Vt(k, j) = -out.Vt(k, j);
    }
  }
  return out;
}

inline DenseMatrix best_rank_approx(const SvdResult& s, std::size_t r) {
  if (r == 0 || r > s.sigma.size()) {
    throw InputError("best_rank_approx: rank " + std::to_string(r) + " outside [1, " +
                     std::to_string(s.sigma.size()) + "]");
  }
  return s.reconstruct(r);
}

inline DenseMatrix best_rank_approx(const DenseMatrix& x, std::size_t r) {
  if (r == 0 || r > std::min(x.rows(), x.cols())) {
    throw InputError("best_rank_approx: rank " + std::to_string(r) + " outside [1, " +
                     std::to_string(std::min(x.rows(), x.cols())) + "]");
  }
  return best_rank_approx(svd(x), r);
}

// Sum of the singular values after the first r: an element-wise bound on
// |X - X(r)|.
inline double tail_bound(std::span<const double> sigma, std::size_t r) {
  double s = 0.0;
  for (std::size_t k = r; k < sigma.size(); ++k) s += sigma[k];
  return s;
}

}  // namespace maco
