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
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "maco/dense.hpp"
#include "maco/error.hpp"
#include "maco/io.hpp"
#include "maco/linalg.hpp"
#include "maco/model.hpp"
#include "maco/solver.hpp"

namespace maco {

struct ClipRange {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
};

// Root-mean-square error of the factor product on held-out triples.
inline double rmse(const FactorPair& f, std::span<const Rating> test, std::optional<ClipRange> clip = {}) {
  if (test.empty()) throw InputError("rmse: empty test set");
  double s = 0.0;
  for (const auto& t : test) {
    double p = product_entry(f, t.row, t.col);
    if (clip) p = std::clamp(p, clip->lo, clip->hi);
    s += (p - t.value) * (p - t.value);
  }
  return std::sqrt(s / static_cast<double>(test.size()));
}

struct Psnr {
  double mse = 0.0;
  double db = 0.0;  // +inf when exact

  bool exact() const { return mse == 0.0; }
};

// 10 log10(255^2 / MSE) over all pixels; the reconstruction is on the raw
// [0, 255] scale and clipped to it first.
inline Psnr psnr(const DenseMatrix& reconstruction, const GrayImage& reference) {
  if (reconstruction.rows() != reference.height || reconstruction.cols() != reference.width) {
    throw InputError("psnr: reconstruction is " + std::to_string(reconstruction.rows()) + "x" +
                     std::to_string(reconstruction.cols()) + ", reference is " + std::to_string(reference.height) +
                     "x" + std::to_string(reference.width));
  }
  double s = 0.0;
  const auto data = reconstruction.data();
  for (std::size_t k = 0; k < data.size(); ++k) {
    const double d = std::clamp(data[k], 0.0, 255.0) - reference.pixels[k];
    s += d * d;
  }
  Psnr out;
  out.mse = s / static_cast<double>(data.size());
  out.db = out.mse == 0.0 ? std::numeric_limits<double>::infinity() : 10.0 * std::log10(255.0 * 255.0 / out.mse);
  return out;
}

inline double relative_error(const DenseMatrix& estimate, const DenseMatrix& reference) {
  const double denom = fro_norm(reference);
  if (!(denom > 0.0)) throw InputError("relative_error: reference has zero norm");
  return fro_dist(estimate, reference) / denom;
}

// Per-snapshot metrics; serialized as CSV for external plotting.
struct MetricRow {
  std::size_t epoch = 0;
  std::uint64_t updates = 0;
  double objective = 0.0;
  std::optional<double> rmse;
  std::optional<double> psnr;
  double seconds = 0.0;
};

struct MetricReport {
  std::vector<MetricRow> rows;

  void add(MetricRow row) {
    if (!rows.empty() && row.epoch <= rows.back().epoch) {
      throw InputError("MetricReport: epochs must be strictly increasing");
    }
    if (!rows.empty()) row.seconds = std::max(row.seconds, rows.back().seconds);
    rows.push_back(row);
  }

  std::string to_csv() const {
    std::string out = "epoch,updates,objective,rmse,psnr,seconds\n";
    for (const auto& r : rows) {
      out += std::to_string(r.epoch) + "," + std::to_string(r.updates) + "," + detail::format_real(r.objective) + ",";
      if (r.rmse) out += detail::format_real(*r.rmse);
      out += ",";
      if (r.psnr) out += detail::format_real(*r.psnr);
      out += "," + detail::format_real(r.seconds) + "\n";
    }
    return out;
  }
};

// m x n matrix of rank r: product of two i.i.d. standard Gaussian factors,
// scaled by 1/sqrt(r) so entries have unit variance.
inline DenseMatrix make_low_rank(std::size_t m, std::size_t n, std::size_t r, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  DenseMatrix a(m, r), b(r, n);
  for (double& x : a.data()) x = g(rng);
  for (double& x : b.data()) x = g(rng);
  auto x = multiply(a, b);
  const double s = 1.0 / std::sqrt(static_cast<double>(r));
  for (double& v : x.data()) v *= s;
  return x;
}

struct SweepConfig {
  std::size_t rank = 7;            // factorization rank of the solver
  std::size_t reference_rank = 7;  // Error is measured against X(reference_rank)
  double mu = 1e-5;
  std::uint64_t iterations = 100000;  // serial iterations, one L and one R update each
  std::uint64_t seed = 0;
};

struct SweepPoint {
  double delta = 0.0;
  double error = 0.0;
};

// Interval slack for each observed entry is [X - delta, X + delta]; no
// equalities. Returns Error(delta) = |Y*(delta) - X(k)|_F / |X(k)|_F.
inline ObservationSet interval_observations(const DenseMatrix& x, std::span<const std::size_t> mask, double delta) {
  ObservationSet obs;
  obs.rows = x.rows();
  obs.cols = x.cols();
  obs.entries.reserve(mask.size());
  for (std::size_t k : mask) {
    const std::size_t i = k / x.cols(), j = k % x.cols();
    obs.entries.push_back(Entry::box(i, j, x(i, j) - delta, x(i, j) + delta));
  }
  require_valid(obs);
  return obs;
}

inline std::vector<SweepPoint> delta_sweep(const DenseMatrix& x, std::span<const std::size_t> mask,
                                           std::span<const double> deltas, const SweepConfig& cfg) {
  const DenseMatrix reference = best_rank_approx(x, cfg.reference_rank);
  const std::size_t per_epoch = std::max(x.rows(), x.cols());
  SolverConfig sc;
  sc.rank = cfg.rank;
  sc.mu = cfg.mu;
  sc.epochs = static_cast<std::size_t>((cfg.iterations + per_epoch - 1) / per_epoch);
  sc.seed = cfg.seed;
  sc.trace_every = 0;
  std::vector<SweepPoint> out;
  for (double d : deltas) {
    const auto state = run(interval_observations(x, mask, d), sc);
    out.push_back({d, relative_error(state.factors.product(), reference)});
  }
  return out;
}

}  // namespace maco
