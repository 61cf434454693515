// evec/wada.hpp

// Copyright 2026  The evec Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

// WADA-style blind SNR estimation. Clean speech amplitudes are modelled as
// Gamma(0.4) and noise as Gaussian; the statistic
//
//   G = log(mean |z|) - mean(log |z|)
//
// grows as the mix gets more speech-like. A Monte Carlo table maps G to SNR.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "evec/audio.hpp"
#include "evec/common.hpp"

namespace evec {

inline constexpr double kWadaGammaShape = 0.4;
inline constexpr double kWadaMinSnrDb = -20.0;
inline constexpr double kWadaMaxSnrDb = 60.0;

/// Expected G of Gaussian noise: log sqrt(2/pi) + (euler_gamma + log 2) / 2.
inline double wada_gaussian_g() {
  return std::log(std::sqrt(2.0 / std::numbers::pi)) + 0.5 * (std::numbers::egamma + std::log(2.0));
}

/// G over the nonzero samples of x, computed as -mean(log(|x_i| / mean|x|)).
/// Dividing first makes a power-of-two gain cancel exactly. Fails when every
/// sample is zero.
inline double wada_statistic(std::span<const double> x) {
  double sum_abs = 0.0;
  std::size_t n = 0;
  for (double v : x) {
    if (v == 0.0) continue;
    sum_abs += std::fabs(v);
    ++n;
  }
  if (n == 0) fail(ErrorKind::kInvalidArgument, "wada: all-zero signal");
  const double mean_abs = sum_abs / static_cast<double>(n);
  double sum_log = 0.0;
  for (double v : x)
    if (v != 0.0) sum_log += std::log(std::fabs(v) / mean_abs);
  return -sum_log / static_cast<double>(n);
}

struct WadaTable {
  std::vector<double> g;       // increasing
  std::vector<double> snr_db;  // increasing, same length

  std::size_t size() const { return g.size(); }
};

namespace detail {

/// Pool-adjacent-violators fit of a non-decreasing sequence (unit weights).
inline std::vector<double> isotonic_increasing(const std::vector<double> &y) {
  std::vector<double> level;
  std::vector<std::size_t> width;
  for (double v : y) {
    level.push_back(v);
    width.push_back(1);
    while (level.size() > 1 && level[level.size() - 2] > level.back()) {
      std::size_t w1 = width[width.size() - 2], w2 = width.back();
      double merged = (level[level.size() - 2] * w1 + level.back() * w2) / (w1 + w2);
      level.pop_back();
      width.pop_back();
      level.back() = merged;
      width.back() = w1 + w2;
    }
  }
  std::vector<double> out;
  out.reserve(y.size());
  for (std::size_t b = 0; b < level.size(); ++b) out.insert(out.end(), width[b], level[b]);
  return out;
}

}  // namespace detail

struct WadaTableOptions {
  double step_db = 1.0;
  std::size_t samples_per_point = 200000;
  std::uint64_t seed = 1;
  int workers = 1;
  // Largest downward step in the raw table that smoothing may absorb.
  double monotone_tolerance = 5e-3;
};

/// Every grid point reuses the same speech and noise draws, so neighbouring
/// G values differ only through the mixing gain. The table is anchored on the
/// exact Gaussian value: entry k is wada_gaussian_g() + G(mix_k) - G(noise),
/// which cancels the sampling error of the shared noise draw. Below about
/// -10 dB the curve is flatter than the spread of G over a few seconds of
/// audio, so estimates there are coarse.
inline WadaTable build_wada_table(const WadaTableOptions &opt) {
  require(opt.step_db > 0.0 && opt.step_db <= 1.0, "build_wada_table: grid step must be in (0, 1] dB");
  require(opt.samples_per_point >= 1000, "build_wada_table: too few samples per point");
  const std::size_t n = opt.samples_per_point;
  std::vector<double> speech(n), noise(n);
  {
    std::mt19937_64 rng(derive_seed(opt.seed, 0x77616461));
    std::gamma_distribution<double> gamma(kWadaGammaShape, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::bernoulli_distribution sign(0.5);
    for (std::size_t i = 0; i < n; ++i) {
      speech[i] = sign(rng) ? gamma(rng) : -gamma(rng);
      noise[i] = gauss(rng);
    }
  }
  const double ps = mean_power(speech), pn = mean_power(noise);

  std::vector<double> grid;
  const int steps = static_cast<int>(std::lround((kWadaMaxSnrDb - kWadaMinSnrDb) / opt.step_db));
  for (int k = 0; k <= steps; ++k) grid.push_back(std::min(kWadaMaxSnrDb, kWadaMinSnrDb + k * opt.step_db));
  if (grid.back() < kWadaMaxSnrDb) grid.push_back(kWadaMaxSnrDb);

  std::vector<double> raw(grid.size());
  parallel_for(grid.size(), opt.workers, [&](std::size_t k) {
    const double a = std::sqrt(pn / ps * std::pow(10.0, grid[k] / 10.0));
    std::vector<double> z(n);
    for (std::size_t i = 0; i < n; ++i) z[i] = a * speech[i] + noise[i];
    raw[k] = wada_statistic(z);
  });
  const double offset = wada_gaussian_g() - wada_statistic(noise);
  for (double &g : raw) g += offset;
  for (std::size_t k = 1; k < raw.size(); ++k)
    if (raw[k - 1] - raw[k] > opt.monotone_tolerance)
      fail(ErrorKind::kNumerical, "build_wada_table: raw table is not monotone");

  WadaTable t;
  t.snr_db = grid;
  t.g = detail::isotonic_increasing(raw);
  // Pooled blocks leave ties; spread them so inversion stays well defined.
  for (std::size_t k = 1; k < t.g.size(); ++k)
    if (t.g[k] <= t.g[k - 1]) t.g[k] = t.g[k - 1] + 1e-12;
  return t;
}

/// Piecewise-linear inverse of the table, clamped to its SNR range.
inline double wada_lookup(const WadaTable &t, double g) {
  require(t.size() >= 2, "wada_lookup: table too small");
  if (g <= t.g.front()) return t.snr_db.front();
  if (g >= t.g.back()) return t.snr_db.back();
  auto it = std::upper_bound(t.g.begin(), t.g.end(), g);
  std::size_t hi = static_cast<std::size_t>(it - t.g.begin()), lo = hi - 1;
  double f = (g - t.g[lo]) / (t.g[hi] - t.g[lo]);
  return t.snr_db[lo] + f * (t.snr_db[hi] - t.snr_db[lo]);
}

inline double wada_estimate(const AudioClip &clip, const WadaTable &table) {
  if (clip.duration() < 1.0) fail(ErrorKind::kInvalidArgument, "wada_estimate: clip shorter than 1 s");
  return wada_lookup(table, wada_statistic(clip.samples));
}

/// One "G snr_db" pair per line.
inline std::string encode_wada_table(const WadaTable &t) {
  std::string out;
  char line[96];
  for (std::size_t k = 0; k < t.size(); ++k) {
    std::snprintf(line, sizeof line, "%.17g %.17g\n", t.g[k], t.snr_db[k]);
    out += line;
  }
  return out;
}

inline WadaTable decode_wada_table(const std::string &text) {
  WadaTable t;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    double g, snr;
    if (!(ls >> g >> snr)) fail(ErrorKind::kIo, "wada table: malformed line: " + line);
    if (!t.g.empty() && !(g > t.g.back() && snr > t.snr_db.back()))
      fail(ErrorKind::kIo, "wada table: values are not increasing");
    t.g.push_back(g);
    t.snr_db.push_back(snr);
  }
  if (t.size() < 2) fail(ErrorKind::kIo, "wada table: fewer than two rows");
  return t;
}

}  // namespace evec
