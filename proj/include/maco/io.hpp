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
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "maco/dense.hpp"
#include "maco/error.hpp"
#include "maco/model.hpp"

namespace maco {

// ---------------------------------------------------------------------------
// Text helpers
// ---------------------------------------------------------------------------
namespace detail {

// Splits text into lines, tracking 1-based line numbers.
class LineReader {
 public:
  explicit LineReader(std::string_view text) : text_(text) {}

  bool next(std::string_view& line) {
    if (pos_ >= text_.size()) return false;
    const std::size_t end = text_.find('\n', pos_);
    const std::size_t stop = end == std::string_view::npos ? text_.size() : end;
    line = text_.substr(pos_, stop - pos_);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    pos_ = stop + 1;
    ++line_no_;
    return true;
  }

  std::size_t line_no() const { return line_no_; }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
  std::size_t line_no_ = 0;
};

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t k = 0;
  while (k < line.size()) {
    while (k < line.size() && (line[k] == ' ' || line[k] == '\t')) ++k;
    if (k >= line.size()) break;
    std::size_t e = k;
    while (e < line.size() && line[e] != ' ' && line[e] != '\t') ++e;
    out.push_back(line.substr(k, e - k));
    k = e;
  }
  return out;
}

inline bool is_skippable(std::string_view line) {
  const std::size_t k = line.find_first_not_of(" \t");
  return k == std::string_view::npos || line[k] == '#' || line[k] == '%';
}

inline std::uint64_t parse_count(std::string_view tok, std::size_t line, const char* what) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) {
    throw ParseError(line, std::string("expected a non-negative integer for ") + what + ", got '" +
                               std::string(tok) + "'");
  }
  return v;
}

inline double parse_real(std::string_view tok, std::size_t line, const char* what) {
  double v = 0.0;
  const char* first = tok.data();
  if (!tok.empty() && tok.front() == '+') ++first;  // from_chars rejects a leading '+'
  const auto [ptr, ec] = std::from_chars(first, tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) {
    throw ParseError(line, std::string("expected a number for ") + what + ", got '" + std::string(tok) + "'");
  }
  if (!std::isfinite(v)) {
    throw ParseError(line, std::string("non-finite ") + what + " '" + std::string(tok) + "'");
  }
  return v;
}

// Shortest-round-trip is not needed; 17 significant digits always re-parse
// to the same double.
inline std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Writes to a sibling temporary and renames on success, so readers never
// observe a partial file.
inline void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write '" + tmp.string() + "'");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) {
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw InputError("failed writing '" + tmp.string() + "'");
    }
  }
  std::filesystem::rename(tmp, path);
}

// ---------------------------------------------------------------------------
// Interval-observation files
//
//   # comment            (also '%')
//   m n count
//   i j E value          1-based indices
//   i j L bound
//   i j U bound
//   i j B lo hi
// ---------------------------------------------------------------------------
inline ObservationSet parse_observations(std::string_view text) {
  detail::LineReader reader(text);
  std::string_view line;
  ObservationSet obs;
  std::vector<std::size_t> lines;  // source line of each entry
  bool have_header = false;
  std::uint64_t expected = 0;

  while (reader.next(line)) {
    if (detail::is_skippable(line)) continue;
    const std::size_t ln = reader.line_no();
    const auto f = detail::split_fields(line);
    if (!have_header) {
      if (f.size() != 3) throw ParseError(ln, "header must be 'rows cols count'");
      obs.rows = detail::parse_count(f[0], ln, "rows");
      obs.cols = detail::parse_count(f[1], ln, "cols");
      expected = detail::parse_count(f[2], ln, "count");
      if (obs.rows == 0 || obs.cols == 0) throw ParseError(ln, "rows and cols must be positive");
      have_header = true;
      obs.entries.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(expected, 1u << 26)));
      continue;
    }
    if (obs.entries.size() == expected) {
      throw ParseError(ln, "more records than the declared count " + std::to_string(expected));
    }
    if (f.size() < 4) throw ParseError(ln, "record must be 'i j KIND value [value2]'");
    const auto i = detail::parse_count(f[0], ln, "row index");
    const auto j = detail::parse_count(f[1], ln, "column index");
    if (i < 1 || i > obs.rows) throw ParseError(ln, "row index " + std::string(f[0]) + " outside [1, " + std::to_string(obs.rows) + "]");
    if (j < 1 || j > obs.cols) throw ParseError(ln, "column index " + std::string(f[1]) + " outside [1, " + std::to_string(obs.cols) + "]");
    if (f[2].size() != 1) throw ParseError(ln, "unknown constraint kind '" + std::string(f[2]) + "'");
    const char kind = f[2][0];
    const std::size_t want = kind == 'B' ? 5 : 4;
    if (kind != 'E' && kind != 'L' && kind != 'U' && kind != 'B') {
      throw ParseError(ln, "unknown constraint kind '" + std::string(f[2]) + "'");
    }
    if (f.size() != want) {
      throw ParseError(ln, std::string("kind ") + kind + " takes " + std::to_string(want - 3) + " value(s)");
    }
    const double a = detail::parse_real(f[3], ln, "value");
    const std::size_t r = i - 1, c = j - 1;
    switch (kind) {
      case 'E': obs.entries.push_back(Entry::equality(r, c, a)); break;
      case 'L': obs.entries.push_back(Entry::lower(r, c, a)); break;
      case 'U': obs.entries.push_back(Entry::upper(r, c, a)); break;
      default: obs.entries.push_back(Entry::box(r, c, a, detail::parse_real(f[4], ln, "upper value"))); break;
    }
    lines.push_back(ln);
  }
  if (!have_header) throw ParseError(reader.line_no() + 1, "missing 'rows cols count' header");
  if (obs.entries.size() != expected) {
    throw ParseError(reader.line_no() + 1, "expected " + std::to_string(expected) + " records, found " +
                                               std::to_string(obs.entries.size()));
  }

  const auto report = validate(obs);
  if (!report.ok()) {
    std::string msg = "observation set violates its invariants:";
    for (const auto& v : report.violations) {
      msg += "\n  line " + std::to_string(lines[v.entry]) + ": " + violation_name(v.kind) + " at (" +
             std::to_string(v.row + 1) + "," + std::to_string(v.col + 1) + ")";
    }
    throw ParseError(lines[report.violations.front().entry], msg);
  }
  return obs;
}

inline std::string serialize_observations(const ObservationSet& obs) {
  std::string out;
  out += std::to_string(obs.rows) + " " + std::to_string(obs.cols) + " " + std::to_string(obs.entries.size()) + "\n";
  for (const auto& e : obs.entries) {
    out += std::to_string(e.row + 1) + " " + std::to_string(e.col + 1) + " " + kind_letter(e.kind) + " ";
    switch (e.kind) {
      case ConstraintKind::Equality:
      case ConstraintKind::Lower: out += detail::format_real(e.lo); break;
      case ConstraintKind::Upper: out += detail::format_real(e.hi); break;
      case ConstraintKind::Box: out += detail::format_real(e.lo) + " " + detail::format_real(e.hi); break;
    }
    out += "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Ratings and interval construction
// ---------------------------------------------------------------------------
struct Rating {
  std::size_t row = 0;
  std::size_t col = 0;
  double value = 0.0;
};

// Each rating x becomes the box [max(scale_min, x - eps), min(x + eps, scale_max)].
// Dimensions default to the largest index seen.
inline ObservationSet build_interval_ratings(std::span<const Rating> ratings, double eps, double scale_min,
                                             double scale_max, std::size_t rows = 0, std::size_t cols = 0) {
  if (!(eps >= 0.0)) throw InputError("interval half-width must be non-negative");
  if (!(scale_min <= scale_max)) throw InputError("rating scale is empty");
  ObservationSet obs;
  for (const auto& r : ratings) {
    if (!(r.value >= scale_min && r.value <= scale_max)) {
      throw InputError("rating " + detail::format_real(r.value) + " at (" + std::to_string(r.row + 1) + "," +
                       std::to_string(r.col + 1) + ") outside the scale [" + detail::format_real(scale_min) +
                       ", " + detail::format_real(scale_max) + "]");
    }
    rows = std::max(rows, r.row + 1);
    cols = std::max(cols, r.col + 1);
    obs.entries.push_back(Entry::box(r.row, r.col, std::max(scale_min, r.value - eps), std::min(r.value + eps, scale_max)));
  }
  obs.rows = rows;
  obs.cols = cols;
  require_valid(obs);
  return obs;
}

// Reads (i, j, x) targets from an observation file; only E records are
// meaningful as point targets.
inline std::vector<Rating> ratings_from_observations(const ObservationSet& obs) {
  std::vector<Rating> out;
  out.reserve(obs.entries.size());
  for (const auto& e : obs.entries) {
    if (e.kind != ConstraintKind::Equality) {
      throw InputError("test records must be equalities (E); found " + std::string(1, kind_letter(e.kind)) +
                       " at (" + std::to_string(e.row + 1) + "," + std::to_string(e.col + 1) + ")");
    }
    out.push_back({e.row, e.col, e.lo});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Masks
// ---------------------------------------------------------------------------

// floor(p*m*n) distinct flat (row-major) indices, ascending, uniformly at
// random and deterministic per seed.
inline std::vector<std::size_t> sample_mask(std::size_t m, std::size_t n, double p, std::uint64_t seed) {
  if (!(p > 0.0 && p <= 1.0)) throw InputError("mask fraction must lie in (0, 1]");
  const std::size_t total = m * n;
  const auto k = static_cast<std::size_t>(std::floor(p * static_cast<double>(total)));
  std::vector<std::size_t> all(total);
  std::iota(all.begin(), all.end(), std::size_t{0});
  std::vector<std::size_t> out;
  out.reserve(k);
  std::mt19937_64 rng(seed);
  std::sample(all.begin(), all.end(), std::back_inserter(out), k, rng);
  return out;
}

// ---------------------------------------------------------------------------
// Images
// ---------------------------------------------------------------------------
struct GrayImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;  // row-major, height rows of width

  GrayImage() = default;
  GrayImage(std::size_t w, std::size_t h, std::uint8_t fill = 0) : width(w), height(h), pixels(w * h, fill) {}

  std::uint8_t& at(std::size_t y, std::size_t x) { return pixels[y * width + x]; }
  std::uint8_t at(std::size_t y, std::size_t x) const { return pixels[y * width + x]; }

  // height x width matrix of pixel values times `scale`.
  DenseMatrix to_matrix(double scale = 1.0) const {
    DenseMatrix m(height, width);
    for (std::size_t k = 0; k < pixels.size(); ++k) m.data()[k] = pixels[k] * scale;
    return m;
  }

  // Inverse of to_matrix: values are divided by `scale`, rounded and
  // clipped to [0, 255].
  static GrayImage from_matrix(const DenseMatrix& m, double scale = 1.0) {
    GrayImage img(m.cols(), m.rows());
    for (std::size_t k = 0; k < img.pixels.size(); ++k) {
      const double v = std::round(std::clamp(m.data()[k] / scale, 0.0, 255.0));
      img.pixels[k] = static_cast<std::uint8_t>(v);
    }
    return img;
  }

  friend bool operator==(const GrayImage&, const GrayImage&) = default;
};

namespace detail {

class PgmScanner {
 public:
  explicit PgmScanner(std::string_view bytes) : b_(bytes) {}

  void skip_space_and_comments() {
    for (;;) {
      while (pos_ < b_.size() && std::isspace(static_cast<unsigned char>(b_[pos_]))) ++pos_;
      if (pos_ < b_.size() && b_[pos_] == '#') {
        while (pos_ < b_.size() && b_[pos_] != '\n') ++pos_;
        continue;
      }
      return;
    }
  }

  std::uint64_t number(const char* what) {
    skip_space_and_comments();
    const std::size_t start = pos_;
    while (pos_ < b_.size() && std::isdigit(static_cast<unsigned char>(b_[pos_]))) ++pos_;
    if (start == pos_) throw InputError(std::string("PGM: expected ") + what);
    std::uint64_t v = 0;
    if (std::from_chars(b_.data() + start, b_.data() + pos_, v).ec != std::errc()) {
      throw InputError(std::string("PGM: ") + what + " out of range");
    }
    return v;
  }

  std::size_t pos() const { return pos_; }
  void advance(std::size_t k) { pos_ += k; }
  std::size_t remaining() const { return b_.size() - pos_; }
  char peek() const { return pos_ < b_.size() ? b_[pos_] : '\0'; }
  std::string_view rest() const { return b_.substr(pos_); }

 private:
  std::string_view b_;
  std::size_t pos_ = 0;
};

}  // namespace detail

// Reads P2 (ASCII) or P5 (binary) graymaps with maxval <= 255.
inline GrayImage read_pgm(std::string_view bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P') throw InputError("PGM: missing magic number");
  const std::string magic(bytes.substr(0, 2));
  if (magic != "P2" && magic != "P5") throw InputError("PGM: unsupported magic '" + magic + "' (need P2 or P5)");
  detail::PgmScanner s(bytes);
  s.advance(2);
  const auto w = s.number("width");
  const auto h = s.number("height");
  const auto maxval = s.number("maxval");
  if (w == 0 || h == 0) throw InputError("PGM: empty image");
  if (maxval == 0 || maxval > 255) throw InputError("PGM: unsupported maxval " + std::to_string(maxval) + " (need 1..255)");
  // Every sample takes at least one byte, which also caps the allocation.
  if (w > s.remaining() || h > s.remaining() / w) {
    throw InputError("PGM: truncated raster (" + std::to_string(w) + "x" + std::to_string(h) + " image in " +
                     std::to_string(s.remaining()) + " bytes)");
  }

  GrayImage img(w, h);
  if (magic == "P5") {
    if (!std::isspace(static_cast<unsigned char>(s.peek()))) throw InputError("PGM: malformed header");
    s.advance(1);
    if (s.remaining() < img.pixels.size()) {
      throw InputError("PGM: truncated raster (" + std::to_string(s.remaining()) + " of " +
                       std::to_string(img.pixels.size()) + " bytes)");
    }
    const auto raster = s.rest();
    for (std::size_t k = 0; k < img.pixels.size(); ++k) {
      const auto v = static_cast<std::uint8_t>(raster[k]);
      if (v > maxval) throw InputError("PGM: pixel value " + std::to_string(v) + " exceeds maxval");
      img.pixels[k] = v;
    }
  } else {
    for (std::size_t k = 0; k < img.pixels.size(); ++k) {
      const auto v = s.number("pixel value");
      if (v > maxval) throw InputError("PGM: pixel value " + std::to_string(v) + " exceeds maxval");
      img.pixels[k] = static_cast<std::uint8_t>(v);
    }
  }
  return img;
}

inline std::string write_pgm(const GrayImage& img, bool binary = true) {
  std::string out = std::string(binary ? "P5" : "P2") + "\n" + std::to_string(img.width) + " " +
                    std::to_string(img.height) + "\n255\n";
  if (binary) {
    out.append(reinterpret_cast<const char*>(img.pixels.data()), img.pixels.size());
  } else {
    for (std::size_t y = 0; y < img.height; ++y) {
      for (std::size_t x = 0; x < img.width; ++x) {
        if (x) out += ' ';
        out += std::to_string(img.at(y, x));
      }
      out += '\n';
    }
  }
  return out;
}

enum class ImageMode {
  EqualityOnly,                // masked pixels as equalities
  EqualityPlusRangeOnMissing,  // plus a caller-chosen box on the other pixels
  BoxRangeEverywhereObserved,  // plus the full pixel range on the other pixels
};

struct ImageConstraintOptions {
  ImageMode mode = ImageMode::BoxRangeEverywhereObserved;
  double scale = 1.0;  // 1 keeps raw [0, 255]; 1/255 normalizes to [0, 1]
  // Box for EqualityPlusRangeOnMissing, on the scaled values.
  double range_lo = 0.0;
  double range_hi = 255.0;
};

// Flat mask indices are row-major over the image (y * width + x).
inline ObservationSet image_to_observations(const GrayImage& img, std::span<const std::size_t> mask,
                                            const ImageConstraintOptions& opt = {}) {
  ObservationSet obs;
  obs.rows = img.height;
  obs.cols = img.width;
  std::vector<bool> observed(img.pixels.size(), false);
  for (std::size_t k : mask) {
    if (k >= observed.size()) throw InputError("mask index " + std::to_string(k) + " outside the image");
    observed[k] = true;
  }
  double lo = opt.range_lo, hi = opt.range_hi;
  if (opt.mode == ImageMode::BoxRangeEverywhereObserved) {
    lo = 0.0;
    hi = 255.0 * opt.scale;
  }
  obs.entries.reserve(opt.mode == ImageMode::EqualityOnly ? mask.size() : img.pixels.size());
  for (std::size_t k = 0; k < img.pixels.size(); ++k) {
    const std::size_t y = k / img.width, x = k % img.width;
    if (observed[k]) {
      obs.entries.push_back(Entry::equality(y, x, img.pixels[k] * opt.scale));
    } else if (opt.mode != ImageMode::EqualityOnly) {
      obs.entries.push_back(Entry::box(y, x, lo, hi));
    }
  }
  require_valid(obs);
  return obs;
}

// ---------------------------------------------------------------------------
// Dense matrices: "rows cols" then row-major values, 17 significant digits.
// ---------------------------------------------------------------------------
inline std::string write_dense(const DenseMatrix& x) {
  std::string out = std::to_string(x.rows()) + " " + std::to_string(x.cols()) + "\n";
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = 0; j < x.cols(); ++j) {
      if (j) out += ' ';
      out += detail::format_real(x(i, j));
    }
    out += '\n';
  }
  return out;
}

inline DenseMatrix read_dense(std::string_view text) {
  detail::LineReader reader(text);
  std::string_view line;
  std::size_t rows = 0, cols = 0;
  bool have_header = false;
  std::vector<double> values;
  while (reader.next(line)) {
    if (detail::is_skippable(line)) continue;
    const std::size_t ln = reader.line_no();
    const auto f = detail::split_fields(line);
    if (!have_header) {
      if (f.size() != 2) throw ParseError(ln, "header must be 'rows cols'");
      rows = detail::parse_count(f[0], ln, "rows");
      cols = detail::parse_count(f[1], ln, "cols");
      if (cols != 0 && rows > std::numeric_limits<std::size_t>::max() / cols) {
        throw ParseError(ln, "dimensions overflow");
      }
      have_header = true;
      values.reserve(std::min<std::size_t>(rows * cols, std::size_t{1} << 26));
      continue;
    }
    for (auto tok : f) {
      if (values.size() == rows * cols) throw ParseError(ln, "more values than " + std::to_string(rows) + "x" + std::to_string(cols));
      values.push_back(detail::parse_real(tok, ln, "matrix value"));
    }
  }
  if (!have_header) throw ParseError(reader.line_no() + 1, "missing 'rows cols' header");
  if (values.size() != rows * cols) {
    throw ParseError(reader.line_no() + 1, "expected " + std::to_string(rows * cols) + " values, found " +
                                               std::to_string(values.size()));
  }
  return DenseMatrix(rows, cols, std::move(values));
}

}  // namespace maco
