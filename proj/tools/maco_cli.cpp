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

// Command-line front end: interval completion, image in-painting, the
// slack sweep on synthetic low-rank matrices, the small worked example and
// held-out RMSE evaluation.
//
// Exit codes: 0 success, 1 input or usage error, 2 numerical abort.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "maco/maco.hpp"

namespace {

using maco::InputError;

constexpr int kExitInput = 1;
constexpr int kExitNumerical = 2;

std::size_t default_threads() {
  if (const char* env = std::getenv("MACO_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v >= 1) return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
    }
    throw InputError(std::string("MACO_THREADS must be a positive integer, got '") + env + "'");
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

std::vector<std::string> split_list(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else if (c != ' ') {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

double to_real(const std::string& tok, const char* what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(tok, &used);
    if (used == tok.size() && std::isfinite(v)) return v;
  } catch (const std::exception&) {
  }
  throw InputError(std::string(what) + ": '" + tok + "' is not a finite number");
}

std::pair<double, double> parse_range(const std::string& s, const char* what) {
  const auto colon = s.find(':');
  if (colon == std::string::npos) throw InputError(std::string(what) + " must look like LO:HI");
  const double lo = to_real(s.substr(0, colon), what), hi = to_real(s.substr(colon + 1), what);
  if (!(lo <= hi)) throw InputError(std::string(what) + ": LO must not exceed HI");
  return {lo, hi};
}

maco::Variant parse_variant(const std::string& s) {
  if (s == "plain") return maco::Variant::plain();
  if (s == "nonneg") return maco::Variant::non_negative();
  if (s.rfind("clip:", 0) == 0) return maco::Variant::clipped(to_real(s.substr(5), "--variant clip bound"));
  throw InputError("--variant must be plain, nonneg or clip:ZETA, got '" + s + "'");
}

// Solver flags shared by complete and inpaint.
struct SolverFlags {
  std::size_t rank = 1;
  double mu = 1e-3;
  std::size_t epochs = 100;
  std::size_t tau = 0;      // 0: same as threads
  std::size_t threads = 0;  // 0: MACO_THREADS, else all cores
  std::uint64_t seed = 0;
  std::string variant = "plain";
  std::size_t trace_every = 1;
  bool no_clock = false;

  void attach(CLI::App* cmd) {
    cmd->add_option("--mu", mu, "Regularization weight (> 0)")->capture_default_str();
    cmd->add_option("--epochs", epochs, "Epochs; one epoch visits every row of L and column of R once in expectation")
        ->capture_default_str();
    cmd->add_option("--tau", tau, "Rows (and columns) updated per parallel pass [default: threads]");
    cmd->add_option("--threads", threads, "Worker threads [default: $MACO_THREADS, else all cores]");
    cmd->add_option("--seed", seed, "Random seed")->capture_default_str();
    cmd->add_option("--variant", variant, "plain | nonneg | clip:ZETA")->capture_default_str();
    cmd->add_option("--trace-every", trace_every, "Epochs between trace rows (0: first and last only)")
        ->capture_default_str();
    cmd->add_flag("--no-clock", no_clock, "Write 0 in the seconds column so traces are byte-reproducible");
  }

  maco::SolverConfig config(std::size_t m, std::size_t n) const {
    maco::SolverConfig cfg;
    cfg.rank = rank;
    cfg.mu = mu;
    cfg.epochs = epochs;
    cfg.seed = seed;
    cfg.variant = parse_variant(variant);
    cfg.threads = threads ? threads : default_threads();
    const std::size_t t = tau ? tau : cfg.threads;
    if (tau && (tau > m || tau > n)) {
      throw InputError("--tau " + std::to_string(tau) + " exceeds the matrix size " + std::to_string(m) + "x" +
                       std::to_string(n));
    }
    cfg.tau_row = std::min(t, m);
    cfg.tau_col = std::min(t, n);
    cfg.trace_every = trace_every;
    return cfg;
  }
};

void print_config(const maco::SolverConfig& cfg, std::size_t m, std::size_t n, std::size_t nnz) {
  std::printf("# m=%zu n=%zu observed=%zu\n", m, n, nnz);
  std::printf("# rank=%zu mu=%.17g epochs=%zu tau_row=%zu tau_col=%zu threads=%zu seed=%llu variant=%s",
              cfg.rank, cfg.mu, cfg.epochs, cfg.tau_row, cfg.tau_col, cfg.threads,
              static_cast<unsigned long long>(cfg.seed),
              cfg.variant.kind == maco::VariantKind::Plain         ? "plain"
              : cfg.variant.kind == maco::VariantKind::NonNegative ? "nonneg"
                                                                    : "clip");
  if (cfg.variant.kind == maco::VariantKind::Clipped) std::printf(":%.17g", cfg.variant.zeta);
  std::printf("\n");
}

// Both conventions: artifact epochs, and the per-observation epochs where
// one epoch is |observed| updates of L plus |observed| updates of R.
void print_progress(const maco::SolverState& st, std::size_t nnz) {
  const double observation_epochs = nnz ? static_cast<double>(st.updates) / (2.0 * static_cast<double>(nnz)) : 0.0;
  std::printf("epochs=%zu coordinate_updates=%llu observation_epochs=%.6g\n", st.epoch,
              static_cast<unsigned long long>(st.updates), observation_epochs);
}

class Clock {
 public:
  explicit Clock(bool off) : off_(off), start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    if (off_) return 0.0;
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  bool off_;
  std::chrono::steady_clock::time_point start_;
};

// ---------------------------------------------------------------------------

struct CompleteArgs {
  std::string obs, out_l, out_r, trace, test;
  SolverFlags solver;
};

int run_complete(const CompleteArgs& a) {
  const auto obs = maco::parse_observations(maco::read_file(a.obs));
  std::optional<std::vector<maco::Rating>> test;
  if (!a.test.empty()) {
    test = maco::ratings_from_observations(maco::parse_observations(maco::read_file(a.test)));
  }
  const auto cfg = a.solver.config(obs.rows, obs.cols);
  print_config(cfg, obs.rows, obs.cols, obs.entries.size());

  maco::Solver solver(obs, cfg);
  maco::MetricReport report;
  const Clock clock(a.solver.no_clock);
  solver.run([&](const maco::SolverState& st, const maco::ObjectiveValue& f) {
    maco::MetricRow row{st.epoch, st.updates, f.total, std::nullopt, std::nullopt, clock.seconds()};
    if (test) row.rmse = maco::rmse(st.factors, *test);
    report.add(row);
  });

  const auto& st = solver.state();
  const auto g = solver.grad_norms();
  print_progress(st, obs.entries.size());
  std::printf("objective_initial=%.17g\nobjective_final=%.17g\n", st.objective_trace.front().objective.total,
              st.objective_trace.back().objective.total);
  std::printf("grad_norm_L=%.6g grad_norm_R=%.6g monotonicity_violations=%zu\n", g.wrt_l, g.wrt_r,
              st.monotonicity_violations);
  if (test) std::printf("rmse=%.6f\n", *report.rows.back().rmse);

  if (!a.out_l.empty()) maco::write_file_atomic(a.out_l, maco::write_dense(st.factors.L));
  if (!a.out_r.empty()) maco::write_file_atomic(a.out_r, maco::write_dense(st.factors.R));
  if (!a.trace.empty()) maco::write_file_atomic(a.trace, report.to_csv());
  return 0;
}

// ---------------------------------------------------------------------------

struct InpaintArgs {
  std::string image, mode = "box255", range = "0:255", out, report;
  double keep = 0.5;
  bool unit_scale = false;
  SolverFlags solver;
};

int run_inpaint(const InpaintArgs& a) {
  const auto img = maco::read_pgm(maco::read_file(a.image));
  if (!(a.keep > 0.0 && a.keep <= 1.0)) throw InputError("--keep-fraction must lie in (0, 1]");
  maco::ImageConstraintOptions opt;
  opt.scale = a.unit_scale ? 1.0 / 255.0 : 1.0;
  if (a.mode == "eq") {
    opt.mode = maco::ImageMode::EqualityOnly;
  } else if (a.mode == "eq+range") {
    opt.mode = maco::ImageMode::EqualityPlusRangeOnMissing;
    std::tie(opt.range_lo, opt.range_hi) = parse_range(a.range, "--range");
  } else if (a.mode == "box255") {
    opt.mode = maco::ImageMode::BoxRangeEverywhereObserved;
  } else {
    throw InputError("--mode must be eq, eq+range or box255, got '" + a.mode + "'");
  }

  const auto mask = maco::sample_mask(img.height, img.width, a.keep, a.solver.seed);
  const auto obs = maco::image_to_observations(img, mask, opt);
  const auto cfg = a.solver.config(obs.rows, obs.cols);
  print_config(cfg, obs.rows, obs.cols, obs.entries.size());
  std::printf("# mode=%s kept=%zu scale=%s\n", a.mode.c_str(), mask.size(), a.unit_scale ? "unit" : "raw");

  auto reconstruction = [&](const maco::FactorPair& f) {
    auto x = f.product();
    for (double& v : x.data()) v /= opt.scale;
    return x;
  };

  maco::Solver solver(obs, cfg);
  maco::MetricReport report;
  const Clock clock(a.solver.no_clock);
  solver.run([&](const maco::SolverState& st, const maco::ObjectiveValue& f) {
    maco::MetricRow row{st.epoch, st.updates, f.total, std::nullopt, std::nullopt, clock.seconds()};
    if (!a.report.empty()) row.psnr = maco::psnr(reconstruction(st.factors), img).db;
    report.add(row);
  });

  const auto& st = solver.state();
  const auto x = reconstruction(st.factors);
  const auto p = maco::psnr(x, img);
  print_progress(st, obs.entries.size());
  std::printf("objective_final=%.17g\n", st.objective_trace.back().objective.total);
  if (p.exact()) {
    std::printf("psnr_db=inf mse=0\n");
  } else {
    std::printf("psnr_db=%.4f mse=%.6g\n", p.db, p.mse);
  }
  if (!a.out.empty()) maco::write_file_atomic(a.out, maco::write_pgm(maco::GrayImage::from_matrix(x)));
  if (!a.report.empty()) maco::write_file_atomic(a.report, report.to_csv());
  return 0;
}

// ---------------------------------------------------------------------------

struct SweepArgs {
  std::string p = "50", deltas, seeds = "1,2,3,4,5", out;
  double iters = 1e5;
  double mu = 1e-5;
  std::size_t size = 20, true_rank = 8, rank = 7, reference_rank = 7;
};

// Fractions in (0, 1] are taken as is; larger values are percentages.
double to_fraction(const std::string& tok) {
  const double v = to_real(tok, "--p");
  const double f = v > 1.0 ? v / 100.0 : v;
  if (!(f > 0.0 && f <= 1.0)) throw InputError("--p values must be fractions in (0, 1] or percentages in (1, 100]");
  return f;
}

int run_sweep(const SweepArgs& a) {
  const auto ps = split_list(a.p, ',');
  const auto deltas = split_list(a.deltas, ',');
  const auto seed_toks = split_list(a.seeds, ',');
  if (ps.empty()) throw InputError("--p must list at least one observed fraction");
  if (deltas.empty()) throw InputError("--deltas must list at least one slack value (number or Rk)");
  if (seed_toks.empty()) throw InputError("--seeds must list at least one seed");
  if (!(a.iters >= 1.0)) throw InputError("--iters must be at least 1");
  if (a.size == 0 || a.true_rank == 0) throw InputError("--size and --true-rank must be positive");

  std::vector<double> fractions;
  for (const auto& t : ps) fractions.push_back(to_fraction(t));
  std::vector<std::uint64_t> seeds;
  for (const auto& t : seed_toks) {
    const double v = to_real(t, "--seeds");
    if (v < 0 || v != std::floor(v)) throw InputError("--seeds must be non-negative integers");
    seeds.push_back(static_cast<std::uint64_t>(v));
  }
  // Validate the slack tokens before any solve.
  for (const auto& d : deltas) {
    if (d[0] == 'R') {
      const double k = to_real(d.substr(1), "--deltas Rk");
      if (k < 0 || k != std::floor(k) || k > static_cast<double>(a.size)) throw InputError("--deltas: bad tail index in '" + d + "'");
    } else if (to_real(d, "--deltas") < 0.0) {
      throw InputError("--deltas must be non-negative");
    }
  }

  maco::SweepConfig cfg;
  cfg.rank = a.rank;
  cfg.reference_rank = a.reference_rank;
  cfg.mu = a.mu;
  cfg.iterations = static_cast<std::uint64_t>(a.iters);

  std::string csv = "p,delta,seed,error\n";
  for (double p : fractions) {
    for (std::uint64_t seed : seeds) {
      const auto x = maco::make_low_rank(a.size, a.size, a.true_rank, seed);
      const auto sigma = maco::svd(x).sigma;
      const auto mask = maco::sample_mask(a.size, a.size, p, seed);
      std::vector<double> values;
      for (const auto& d : deltas) {
        values.push_back(d[0] == 'R' ? maco::tail_bound(sigma, static_cast<std::size_t>(std::stoul(d.substr(1))))
                                     : to_real(d, "--deltas"));
      }
      cfg.seed = seed;
      for (const auto& pt : maco::delta_sweep(x, mask, values, cfg)) {
        csv += maco::detail::format_real(p) + "," + maco::detail::format_real(pt.delta) + "," +
               std::to_string(seed) + "," + maco::detail::format_real(pt.error) + "\n";
        std::printf("p=%g seed=%llu delta=%.6g error=%.6f\n", p, static_cast<unsigned long long>(seed), pt.delta,
                    pt.error);
      }
    }
  }
  maco::write_file_atomic(a.out, csv);
  return 0;
}

// ---------------------------------------------------------------------------

int run_recover_demo() {
  const maco::DenseMatrix x(3, 3, {68.16, 78.12, 24.04, 78.12, 90.09, 30.03, 24.04, 30.03, 20.01});
  const auto s = maco::svd(x);
  auto print = [](const char* name, const maco::DenseMatrix& m) {
    std::printf("%s =\n", name);
    for (std::size_t i = 0; i < m.rows(); ++i) {
      for (std::size_t j = 0; j < m.cols(); ++j) std::printf("  %.4f", m(i, j));
      std::printf("\n");
    }
  };
  print("X", x);
  std::printf("sigma = (%.4f, %.4f, %.4f)\n", s.sigma[0], s.sigma[1], s.sigma[2]);
  print("Y*(2)", maco::best_rank_approx(s, 2));
  std::printf("R(2) = %.4f\n", maco::tail_bound(s.sigma, 2));
  return 0;
}

// ---------------------------------------------------------------------------

struct EvaluateArgs {
  std::string l, r, test, clip;
};

int run_evaluate(const EvaluateArgs& a) {
  maco::FactorPair f(maco::read_dense(maco::read_file(a.l)), maco::read_dense(maco::read_file(a.r)));
  const auto test = maco::ratings_from_observations(maco::parse_observations(maco::read_file(a.test)));
  for (const auto& t : test) {
    if (t.row >= f.rows() || t.col >= f.cols()) {
      throw InputError("test entry (" + std::to_string(t.row + 1) + "," + std::to_string(t.col + 1) +
                       ") outside the " + std::to_string(f.rows()) + "x" + std::to_string(f.cols()) + " factors");
    }
  }
  std::optional<maco::ClipRange> clip;
  if (!a.clip.empty()) {
    const auto [lo, hi] = parse_range(a.clip, "--clip");
    clip = maco::ClipRange{lo, hi};
  }
  const double e = maco::rmse(f, test, clip);
  std::printf("RMSE %.6f\nrmse_exact %.17g\n", e, e);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Low-rank matrix completion under interval uncertainty by parallel coordinate descent"};
  app.require_subcommand(1);

  CompleteArgs complete;
  auto* c = app.add_subcommand("complete", "Complete a matrix from an interval-observation file");
  c->add_option("--obs", complete.obs, "Observation file (m n count; i j E|L|U|B v [v2])")->required();
  c->add_option("--rank", complete.solver.rank, "Factorization rank")->required();
  complete.solver.attach(c);
  c->add_option("--out-l", complete.out_l, "Write L as a dense matrix file");
  c->add_option("--out-r", complete.out_r, "Write R as a dense matrix file");
  c->add_option("--trace", complete.trace, "Write the per-snapshot CSV trace");
  c->add_option("--test", complete.test, "Held-out equality records; adds an rmse column to the trace");

  InpaintArgs inpaint;
  inpaint.solver.rank = 50;
  inpaint.solver.epochs = 1000;
  inpaint.solver.mu = 100.0;  // raw [0, 255] scale; divide by 255^2 with --unit-scale
  auto* ip = app.add_subcommand("inpaint", "Reconstruct a grayscale image from a random subset of its pixels");
  ip->add_option("--image", inpaint.image, "PGM image (P2 or P5)")->required();
  ip->add_option("--keep-fraction", inpaint.keep, "Fraction of pixels observed")->capture_default_str();
  ip->add_option("--rank", inpaint.solver.rank, "Factorization rank")->capture_default_str();
  ip->add_option("--mode", inpaint.mode,
                 "eq: observed pixels only; eq+range: plus --range on missing pixels; box255: plus the full "
                 "pixel range on missing pixels")
      ->capture_default_str();
  ip->add_option("--range", inpaint.range, "LO:HI box for eq+range, on the working scale")->capture_default_str();
  ip->add_flag("--unit-scale", inpaint.unit_scale, "Work on pixel/255 instead of raw [0, 255]");
  inpaint.solver.attach(ip);
  ip->add_option("--out", inpaint.out, "Write the reconstruction as binary PGM");
  ip->add_option("--report", inpaint.report, "Write the CSV trace with a psnr column");

  SweepArgs sweep;
  auto* sw = app.add_subcommand("sweep", "Error of slack-box completion against the slack width on random low-rank matrices");
  sw->add_option("--p", sweep.p, "Observed fractions or percentages, comma separated")->capture_default_str();
  sw->add_option("--deltas", sweep.deltas, "Slack half-widths, comma separated; Rk means the singular-value tail after k")
      ->required();
  sw->add_option("--seeds", sweep.seeds, "Instance seeds, comma separated")->capture_default_str();
  sw->add_option("--iters", sweep.iters, "Serial iterations (one L and one R update each)")->capture_default_str();
  sw->add_option("--mu", sweep.mu, "Regularization weight")->capture_default_str();
  sw->add_option("--size", sweep.size, "Rows and columns of each instance")->capture_default_str();
  sw->add_option("--true-rank", sweep.true_rank, "Rank of each instance")->capture_default_str();
  sw->add_option("--rank", sweep.rank, "Factorization rank of the solver")->capture_default_str();
  sw->add_option("--reference-rank", sweep.reference_rank, "Error is measured against the best approximation of this rank")
      ->capture_default_str();
  sw->add_option("--out", sweep.out, "CSV output (p,delta,seed,error)")->required();

  auto* demo = app.add_subcommand("recover-demo", "Print the 3x3 example, its spectrum and best rank-2 approximation");

  EvaluateArgs evaluate;
  auto* ev = app.add_subcommand("evaluate", "RMSE of stored factors on held-out equality records");
  ev->add_option("--factors-l", evaluate.l, "Dense matrix file for L")->required();
  ev->add_option("--factors-r", evaluate.r, "Dense matrix file for R")->required();
  ev->add_option("--test", evaluate.test, "Observation file of E records")->required();
  ev->add_option("--clip", evaluate.clip, "LO:HI range applied to predictions first");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitInput;
  }

  try {
    if (c->parsed()) return run_complete(complete);
    if (ip->parsed()) return run_inpaint(inpaint);
    if (sw->parsed()) return run_sweep(sweep);
    if (demo->parsed()) return run_recover_demo();
    if (ev->parsed()) return run_evaluate(evaluate);
  } catch (const maco::NumericalError& e) {
    std::fprintf(stderr, "numerical abort: %s\n", e.what());
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitInput;
  }
  return kExitInput;
}
