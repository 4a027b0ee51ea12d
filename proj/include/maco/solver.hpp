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
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "maco/dense.hpp"
#include "maco/error.hpp"
#include "maco/model.hpp"
#include "maco/objective.hpp"
#include "maco/parallel.hpp"

namespace maco {

enum class VariantKind { Plain, NonNegative, Clipped };

// Optional projection applied after every coordinate step.
struct Variant {
  VariantKind kind = VariantKind::Plain;
  double zeta = 0.0;  // Clipped only

  static Variant plain() { return {}; }
  static Variant non_negative() { return {VariantKind::NonNegative, 0.0}; }
  static Variant clipped(double zeta) {
    if (!(zeta > 0.0) || !std::isfinite(zeta)) {
      throw InputError("clip bound must be positive and finite, got " + std::to_string(zeta));
    }
    return {VariantKind::Clipped, zeta};
  }
};

inline double apply_variant_clamp(double value, const Variant& variant) {
  switch (variant.kind) {
    case VariantKind::Plain: return value;
    case VariantKind::NonNegative: return std::max(0.0, value);
    case VariantKind::Clipped: return std::max(std::min(variant.zeta, value), -variant.zeta);
  }
  return value;
}

struct SolverConfig {
  std::size_t rank = 1;
  double mu = 1e-3;
  std::size_t epochs = 1;
  std::size_t tau_row = 1;
  std::size_t tau_col = 1;
  std::uint64_t seed = 0;
  Variant variant;
  std::size_t threads = 1;
  std::size_t trace_every = 1;  // 0 disables intermediate snapshots
};

inline void validate_config(const SolverConfig& cfg, std::size_t m, std::size_t n) {
  if (cfg.rank == 0) throw InputError("rank must be positive");
  detail::require_mu(cfg.mu);
  if (cfg.tau_row == 0 || cfg.tau_row > m) {
    throw InputError("tau_row must lie in [1, " + std::to_string(m) + "], got " +
                     std::to_string(cfg.tau_row));
  }
  if (cfg.tau_col == 0 || cfg.tau_col > n) {
    throw InputError("tau_col must lie in [1, " + std::to_string(n) + "], got " +
                     std::to_string(cfg.tau_col));
  }
  if (cfg.threads == 0) throw InputError("threads must be at least 1");
  if (cfg.variant.kind == VariantKind::Clipped) Variant::clipped(cfg.variant.zeta);
}

struct TracePoint {
  std::size_t epoch = 0;
  std::uint64_t updates = 0;
  ObjectiveValue objective;
};

struct SolverState {
  FactorPair factors;
  ResidualCache residuals;
  DenseMatrix row_lips;  // A(i, v) = W_{i,v}(R), m x r
  DenseMatrix col_lips;  // B(v, j) = V_{v,j}(L), r x n
  std::size_t epoch = 0;
  std::uint64_t updates = 0;  // coordinate updates of L and R combined
  std::vector<TracePoint> objective_trace;
  std::size_t monotonicity_violations = 0;
  std::mt19937_64 rng;
};

struct GradNorms {
  double wrt_l = 0.0;
  double wrt_r = 0.0;
};

// Largest deviation of the incrementally maintained caches from a
// from-scratch recomputation.
struct CacheDrift {
  double residual_abs = 0.0;
  double lipschitz_rel = 0.0;
  double min_lipschitz = 0.0;
  double max_lipschitz = 0.0;
};

using SolverCallback = std::function<void(const SolverState&, const ObjectiveValue&)>;

// Alternating parallel coordinate descent on f(L, R).
//
// Each row pass samples tau_row distinct rows of L, picks one random rank
// coordinate per row and takes the exact minimizing step of the coordinate's
// quadratic upper model. Column passes do the same on R. Entry products and
// coordinate Lipschitz constants are cached and updated incrementally, so a
// step costs O(support of its row or column).
//
// Rows sampled in one pass touch disjoint factor entries and disjoint cached
// products; the only shared writes are the column Lipschitz constants, which
// are accumulated atomically when threads > 1.
class Solver {
 public:
  Solver(ObservationSet obs, SolverConfig cfg)
      : obs_(std::move(obs)), cfg_(cfg), index_(build_index(obs_)), pool_(cfg.threads) {
    validate_config(cfg_, obs_.rows, obs_.cols);
    const std::size_t m = obs_.rows, n = obs_.cols, r = cfg_.rank;

    state_.rng.seed(cfg_.seed);
    // Uniform in [-s, s] with s = 1/sqrt(r), so initial products are O(1)
    // whatever the rank. The non-negative variant draws from [0, s] and the
    // clipped one starts inside its box, keeping every step a projection
    // from a feasible point.
    const double s = 1.0 / std::sqrt(static_cast<double>(r));
    std::uniform_real_distribution<double> dist(-s, s);
    state_.factors = FactorPair(m, n, r);
    for (double& x : state_.factors.L.data()) x = initial_value(dist(state_.rng));
    for (double& x : state_.factors.R.data()) x = initial_value(dist(state_.rng));

    row_perm_.resize(m);
    col_perm_.resize(n);
    std::iota(row_perm_.begin(), row_perm_.end(), std::size_t{0});
    std::iota(col_perm_.begin(), col_perm_.end(), std::size_t{0});
    refresh_caches();
  }

  const SolverState& state() const { return state_; }
  const SolverConfig& config() const { return cfg_; }
  const ObservationSet& observations() const { return obs_; }
  const CsrIndex& index() const { return index_; }
  const FactorPair& factors() const { return state_.factors; }
  // Rows (or columns) and rank coordinates chosen by the most recent pass.
  std::span<const std::size_t> last_sampled() const { return sampled_; }
  std::span<const std::size_t> last_ranks() const { return ranks_; }

  // Replaces the factors (e.g. from a checkpoint) and rebuilds the caches.
  void set_factors(FactorPair f) {
    if (f.rows() != obs_.rows || f.cols() != obs_.cols || f.rank() != cfg_.rank) {
      throw InputError("set_factors: shape does not match the problem");
    }
    state_.factors = std::move(f);
    refresh_caches();
  }

  // Recomputes products and Lipschitz constants from the factors.
  void refresh_caches() {
    const std::size_t m = obs_.rows, n = obs_.cols, r = cfg_.rank;
    state_.residuals = ResidualCache::compute(state_.factors, obs_);
    state_.row_lips = DenseMatrix(m, r);
    state_.col_lips = DenseMatrix(r, n);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t v = 0; v < r; ++v)
        state_.row_lips(i, v) = row_lipschitz(index_, state_.factors.R, i, v, cfg_.mu);
    for (std::size_t v = 0; v < r; ++v)
      for (std::size_t j = 0; j < n; ++j)
        state_.col_lips(v, j) = col_lipschitz(index_, state_.factors.L, v, j, cfg_.mu);
  }

  ObjectiveValue objective() const { return eval_objective(state_.factors, obs_, cfg_.mu); }

  void row_pass() {
    sample(row_perm_, cfg_.tau_row);
    const bool shared = pool_.size() > 1;
    pool_.parallel_for(cfg_.tau_row, [&](std::size_t k) {
      update_row(sampled_[k], ranks_[k], shared);
    });
    state_.updates += cfg_.tau_row;
    for (std::size_t k = 0; k < cfg_.tau_row; ++k) {
      const double x = state_.factors.L(sampled_[k], ranks_[k]);
      if (!std::isfinite(x)) fail("L", sampled_[k], ranks_[k]);
    }
  }

  void col_pass() {
    sample(col_perm_, cfg_.tau_col);
    const bool shared = pool_.size() > 1;
    pool_.parallel_for(cfg_.tau_col, [&](std::size_t k) {
      update_col(ranks_[k], sampled_[k], shared);
    });
    state_.updates += cfg_.tau_col;
    for (std::size_t k = 0; k < cfg_.tau_col; ++k) {
      const double x = state_.factors.R(ranks_[k], sampled_[k]);
      if (!std::isfinite(x)) fail("R", ranks_[k], sampled_[k]);
    }
  }

  std::size_t row_passes_per_epoch() const { return (obs_.rows + cfg_.tau_row - 1) / cfg_.tau_row; }
  std::size_t col_passes_per_epoch() const { return (obs_.cols + cfg_.tau_col - 1) / cfg_.tau_col; }

  // Row and column passes alternate one for one until each side has had
  // its ceil(dim / tau) passes.
  void run_epoch() {
    const std::size_t pr = row_passes_per_epoch(), pc = col_passes_per_epoch();
    for (std::size_t k = 0; k < std::max(pr, pc); ++k) {
      if (k < pr) row_pass();
      if (k < pc) col_pass();
    }
    ++state_.epoch;
  }

  // Runs cfg.epochs epochs, recording the objective at epoch 0, every
  // trace_every epochs and at the end.
  const SolverState& run(const SolverCallback& callback = {}) {
    record(callback);
    for (std::size_t e = 0; e < cfg_.epochs; ++e) {
      run_epoch();
      const bool last = e + 1 == cfg_.epochs;
      if (last || (cfg_.trace_every != 0 && state_.epoch % cfg_.trace_every == 0)) record(callback);
    }
    return state_;
  }

  GradNorms grad_norms() const {
    const auto& f = state_.factors;
    GradNorms g;
    for (std::size_t i = 0; i < obs_.rows; ++i)
      for (std::size_t v = 0; v < cfg_.rank; ++v) {
        const double d = row_directional_grad(f, obs_, index_, state_.residuals, i, v, cfg_.mu);
        g.wrt_l += d * d;
      }
    for (std::size_t v = 0; v < cfg_.rank; ++v)
      for (std::size_t j = 0; j < obs_.cols; ++j) {
        const double d = col_directional_grad(f, obs_, index_, state_.residuals, v, j, cfg_.mu);
        g.wrt_r += d * d;
      }
    g.wrt_l = std::sqrt(g.wrt_l);
    g.wrt_r = std::sqrt(g.wrt_r);
    return g;
  }

  CacheDrift cache_drift() const {
    CacheDrift d;
    const auto fresh = ResidualCache::compute(state_.factors, obs_);
    for (std::size_t e = 0; e < fresh.products.size(); ++e) {
      d.residual_abs = std::max(d.residual_abs, std::abs(fresh.products[e] - state_.residuals.products[e]));
    }
    d.min_lipschitz = std::numeric_limits<double>::infinity();
    auto check = [&](double cached, double exact) {
      d.lipschitz_rel = std::max(d.lipschitz_rel, std::abs(cached - exact) / exact);
      d.min_lipschitz = std::min(d.min_lipschitz, cached);
      d.max_lipschitz = std::max(d.max_lipschitz, cached);
    };
    for (std::size_t i = 0; i < obs_.rows; ++i)
      for (std::size_t v = 0; v < cfg_.rank; ++v)
        check(state_.row_lips(i, v), row_lipschitz(index_, state_.factors.R, i, v, cfg_.mu));
    for (std::size_t v = 0; v < cfg_.rank; ++v)
      for (std::size_t j = 0; j < obs_.cols; ++j)
        check(state_.col_lips(v, j), col_lipschitz(index_, state_.factors.L, v, j, cfg_.mu));
    return d;
  }

 private:
  double initial_value(double u) const {
    switch (cfg_.variant.kind) {
      case VariantKind::NonNegative: return std::abs(u);
      case VariantKind::Clipped: return apply_variant_clamp(u, cfg_.variant);
      case VariantKind::Plain: break;
    }
    return u;
  }

  // Uniform subset of size tau without replacement (partial Fisher-Yates on
  // a persistent permutation), plus one uniform rank coordinate per member.
  void sample(std::vector<std::size_t>& perm, std::size_t tau) {
    sampled_.resize(tau);
    ranks_.resize(tau);
    auto& rng = state_.rng;
    for (std::size_t k = 0; k < tau; ++k) {
      std::uniform_int_distribution<std::size_t> pick(k, perm.size() - 1);
      std::swap(perm[k], perm[pick(rng)]);
      sampled_[k] = perm[k];
    }
    std::uniform_int_distribution<std::size_t> rank_pick(0, cfg_.rank - 1);
    for (std::size_t k = 0; k < tau; ++k) ranks_[k] = rank_pick(rng);
  }

  static void add_to(double& target, double delta, bool shared) {
    if (shared) {
      std::atomic_ref<double>(target).fetch_add(delta, std::memory_order_relaxed);
    } else {
      target += delta;
    }
  }

  void update_row(std::size_t i, std::size_t v, bool shared) {
    auto& L = state_.factors.L;
    auto& products = state_.residuals.products;
    const auto rrow = state_.factors.R.row(v);
    const std::size_t begin = index_.row_ptr[i], end = index_.row_ptr[i + 1];

    double grad = cfg_.mu * L(i, v);
    for (std::size_t k = begin; k < end; ++k) {
      const std::size_t e = index_.row_entries[k];
      grad += obs_.entries[e].slope(products[e]) * rrow[index_.row_cols[k]];
    }
    const double lip = std::max(state_.row_lips(i, v), cfg_.mu);
    const double old_value = L(i, v);
    const double new_value = apply_variant_clamp(old_value + coordinate_update(grad, lip).delta, cfg_.variant);
    const double step = new_value - old_value;
    if (step == 0.0) return;
    L(i, v) = new_value;

    const double dsq = new_value * new_value - old_value * old_value;
    auto brow = state_.col_lips.row(v);
    for (std::size_t k = begin; k < end; ++k) {
      const std::size_t j = index_.row_cols[k];
      products[index_.row_entries[k]] += step * rrow[j];
      add_to(brow[j], dsq, shared);
    }
  }

  void update_col(std::size_t v, std::size_t j, bool shared) {
    auto& R = state_.factors.R;
    const auto& L = state_.factors.L;
    auto& products = state_.residuals.products;
    const std::size_t begin = index_.col_ptr[j], end = index_.col_ptr[j + 1];

    double grad = cfg_.mu * R(v, j);
    for (std::size_t k = begin; k < end; ++k) {
      const std::size_t e = index_.col_entries[k];
      grad += obs_.entries[e].slope(products[e]) * L(index_.col_rows[k], v);
    }
    const double lip = std::max(state_.col_lips(v, j), cfg_.mu);
    const double old_value = R(v, j);
    const double new_value = apply_variant_clamp(old_value + coordinate_update(grad, lip).delta, cfg_.variant);
    const double step = new_value - old_value;
    if (step == 0.0) return;
    R(v, j) = new_value;

    const double dsq = new_value * new_value - old_value * old_value;
    for (std::size_t k = begin; k < end; ++k) {
      const std::size_t i = index_.col_rows[k];
      products[index_.col_entries[k]] += step * L(i, v);
      add_to(state_.row_lips(i, v), dsq, shared);
    }
  }

  void record(const SolverCallback& callback) {
    const ObjectiveValue f = objective();
    auto& trace = state_.objective_trace;
    if (!trace.empty()) {
      const double prev = trace.back().objective.total;
      if (f.total > prev + 1e-9 + 1e-12 * std::abs(prev)) ++state_.monotonicity_violations;
    }
    trace.push_back({state_.epoch, state_.updates, f});
    if (!std::isfinite(f.total)) {
      throw NumericalError("objective became non-finite at epoch " + std::to_string(state_.epoch));
    }
    if (callback) callback(state_, f);
  }

  [[noreturn]] void fail(const char* which, std::size_t a, std::size_t b) const {
    throw NumericalError(std::string("non-finite factor entry ") + which + "(" + std::to_string(a) +
                         "," + std::to_string(b) + ") at epoch " + std::to_string(state_.epoch) +
                         " after " + std::to_string(state_.updates) + " updates");
  }

  ObservationSet obs_;
  SolverConfig cfg_;
  CsrIndex index_;
  SolverState state_;
  std::vector<std::size_t> row_perm_;
  std::vector<std::size_t> col_perm_;
  std::vector<std::size_t> sampled_;
  std::vector<std::size_t> ranks_;
  WorkerPool pool_;
};

inline SolverState run(const ObservationSet& obs, const SolverConfig& cfg,
                       const SolverCallback& callback = {}) {
  Solver solver(obs, cfg);
  solver.run(callback);
  return solver.state();
}

}  // namespace maco
