// evec/features.hpp

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

// MFCC front end: per-frame pre-emphasis, Hamming window, power spectrum,
// triangular mel filter bank, log, DCT-II (coefficients 1..19), plus the
// log frame energy as the last column.

#pragma once

#include <cmath>
#include <complex>
#include <filesystem>
#include <numbers>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

#include "evec/audio.hpp"
#include "evec/common.hpp"
#include "evec/serialize.hpp"

namespace evec {

struct FeatureConfig {
  int frame_length = 400;  // 25 ms at 16 kHz
  int frame_shift = 160;   // 10 ms
  int fft_size = 512;
  int num_mel = 26;
  int num_ceps = 19;  // c1..c19; c0 is replaced by log energy
  double preemphasis = 0.97;
  double low_hz = 0.0;
  double high_hz = 8000.0;
  double log_floor = 1e-10;

  int dim() const { return num_ceps + 1; }
};

struct FeatureMatrix {
  Eigen::MatrixXd frames;  // T x F
  double frame_shift = 0.01;

  Eigen::Index num_frames() const { return frames.rows(); }
  Eigen::Index dim() const { return frames.cols(); }
};

inline double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

inline Eigen::Index num_frames(std::size_t num_samples, const FeatureConfig &cfg) {
  if (num_samples < static_cast<std::size_t>(cfg.frame_length)) return 0;
  return static_cast<Eigen::Index>((num_samples - cfg.frame_length) / cfg.frame_shift + 1);
}

class MfccExtractor {
 public:
  explicit MfccExtractor(const FeatureConfig &cfg = {}) : cfg_(cfg) {
    require(cfg.frame_length > 0 && cfg.frame_shift > 0 && cfg.fft_size >= cfg.frame_length,
            "feature config: bad framing");
    require(cfg.num_ceps >= 1 && cfg.num_ceps < cfg.num_mel, "feature config: bad cepstral order");
    const int bins = cfg.fft_size / 2 + 1;

    window_.resize(cfg.frame_length);
    for (int n = 0; n < cfg.frame_length; ++n)
      window_[n] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * n / (cfg.frame_length - 1));

    const double mlo = hz_to_mel(cfg.low_hz), mhi = hz_to_mel(cfg.high_hz);
    std::vector<double> edge(cfg.num_mel + 2);
    for (int i = 0; i < cfg.num_mel + 2; ++i)
      edge[i] = mel_to_hz(mlo + (mhi - mlo) * i / (cfg.num_mel + 1));
    centres_.assign(edge.begin() + 1, edge.end() - 1);
    fbank_ = Eigen::MatrixXd::Zero(cfg.num_mel, bins);
    for (int m = 0; m < cfg.num_mel; ++m) {
      for (int k = 0; k < bins; ++k) {
        double f = static_cast<double>(k) * kSampleRate / cfg.fft_size;
        double w = 0.0;
        if (f > edge[m] && f <= edge[m + 1]) w = (f - edge[m]) / (edge[m + 1] - edge[m]);
        else if (f > edge[m + 1] && f < edge[m + 2]) w = (edge[m + 2] - f) / (edge[m + 2] - edge[m + 1]);
        fbank_(m, k) = w;
      }
    }
    dct_.resize(cfg.num_ceps, cfg.num_mel);
    const double scale = std::sqrt(2.0 / cfg.num_mel);
    for (int i = 0; i < cfg.num_ceps; ++i)
      for (int m = 0; m < cfg.num_mel; ++m)
        dct_(i, m) = scale * std::cos(std::numbers::pi * (i + 1) * (m + 0.5) / cfg.num_mel);
  }

  const FeatureConfig &config() const { return cfg_; }
  const std::vector<double> &filter_centres_hz() const { return centres_; }

  /// Mel filter-bank energies before the log, one row per frame.
  Eigen::MatrixXd filterbank_energies(const AudioClip &clip) const {
    Eigen::MatrixXd out;
    run(clip, &out, nullptr);
    return out;
  }

  FeatureMatrix operator()(const AudioClip &clip) const {
    FeatureMatrix fm;
    fm.frame_shift = static_cast<double>(cfg_.frame_shift) / kSampleRate;
    Eigen::MatrixXd fb;
    Eigen::VectorXd log_energy;
    run(clip, &fb, &log_energy);
    fb = fb.array().max(cfg_.log_floor).log().matrix();
    fm.frames.resize(fb.rows(), cfg_.dim());
    fm.frames.leftCols(cfg_.num_ceps) = fb * dct_.transpose();
    fm.frames.col(cfg_.num_ceps) = log_energy;
    return fm;
  }

 private:
  void run(const AudioClip &clip, Eigen::MatrixXd *fb, Eigen::VectorXd *log_energy) const {
    if (clip.sample_rate != kSampleRate)
      fail(ErrorKind::kInvalidArgument, "features: only 16 kHz audio is supported");
    const Eigen::Index T = num_frames(clip.size(), cfg_);
    if (T == 0) fail(ErrorKind::kInvalidArgument, "features: clip shorter than one frame");
    const int L = cfg_.frame_length, bins = cfg_.fft_size / 2 + 1;
    fb->resize(T, cfg_.num_mel);
    if (log_energy) log_energy->resize(T);

    Eigen::FFT<double> fft;
    std::vector<double> buf(cfg_.fft_size);
    std::vector<std::complex<double>> spec;
    Eigen::VectorXd power(bins);
    for (Eigen::Index t = 0; t < T; ++t) {
      const double *x = clip.samples.data() + t * cfg_.frame_shift;
      double energy = 0.0;
      for (int n = 0; n < L; ++n) energy += x[n] * x[n];
      std::fill(buf.begin(), buf.end(), 0.0);
      for (int n = 0; n < L; ++n) {
        double prev = n > 0 ? x[n - 1] : x[0];
        buf[n] = (x[n] - cfg_.preemphasis * prev) * window_[n];
      }
      fft.fwd(spec, buf);
      for (int k = 0; k < bins; ++k) power(k) = std::norm(spec[k]);
      fb->row(t) = (fbank_ * power).transpose();
      if (log_energy) (*log_energy)(t) = std::log(std::max(energy, cfg_.log_floor));
    }
  }

  FeatureConfig cfg_;
  std::vector<double> window_;
  std::vector<double> centres_;
  Eigen::MatrixXd fbank_;  // num_mel x bins
  Eigen::MatrixXd dct_;    // num_ceps x num_mel
};

inline FeatureMatrix extract_mfcc(const AudioClip &clip, const FeatureConfig &cfg = {}) {
  return MfccExtractor(cfg)(clip);
}

/// Per-utterance mean and variance normalization. Constant columns become
/// zero; near-constant columns are only mean-centered.
inline FeatureMatrix cmvn(const FeatureMatrix &in) {
  const Eigen::Index T = in.num_frames();
  if (T < 2) fail(ErrorKind::kInvalidArgument, "cmvn: need at least two frames");
  FeatureMatrix out = in;
  for (Eigen::Index c = 0; c < in.dim(); ++c) {
    auto col = out.frames.col(c);
    if ((col.array() == col(0)).all()) {
      col.setZero();
      continue;
    }
    const double mean = col.mean();
    col.array() -= mean;
    const double var = col.squaredNorm() / static_cast<double>(T);
    if (var > 1e-20 * std::max(1.0, mean * mean)) col /= std::sqrt(var);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Binary cache: "EVFT", u32 version, u32 T, u32 F, f32 frame_shift, then
// T*F little-endian float32 values in row-major order.

inline std::string encode_features(const FeatureMatrix &fm) {
  BinaryWriter w;
  w.magic("EVFT", 1);
  w.u32(static_cast<std::uint32_t>(fm.num_frames()));
  w.u32(static_cast<std::uint32_t>(fm.dim()));
  w.f32(static_cast<float>(fm.frame_shift));
  for (Eigen::Index t = 0; t < fm.num_frames(); ++t)
    for (Eigen::Index c = 0; c < fm.dim(); ++c) w.f32(static_cast<float>(fm.frames(t, c)));
  return w.bytes();
}

inline FeatureMatrix decode_features(std::string bytes) {
  BinaryReader r(std::move(bytes));
  if (r.magic("EVFT") != 1) fail(ErrorKind::kIo, "feature cache: unsupported version");
  std::uint32_t T = r.u32(), F = r.u32();
  FeatureMatrix fm;
  fm.frame_shift = r.f32();
  fm.frames.resize(T, F);
  for (std::uint32_t t = 0; t < T; ++t)
    for (std::uint32_t c = 0; c < F; ++c) fm.frames(t, c) = r.f32();
  return fm;
}

}  // namespace evec
