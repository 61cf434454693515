// evec/audio.hpp

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

// Audio container, RIFF/WAVE PCM-16 I/O and the few signal primitives the
// rest of the library builds on.

#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "evec/common.hpp"

namespace evec {

struct AudioClip {
  std::vector<double> samples;
  int sample_rate = kSampleRate;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  double duration() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }
};

inline std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

// ---------------------------------------------------------------------------
// WAV I/O

namespace detail {

inline std::uint16_t read_u16(const char *p) {
  return static_cast<std::uint16_t>(static_cast<unsigned char>(p[0]) |
                                    (static_cast<unsigned char>(p[1]) << 8));
}
inline std::uint32_t read_u32(const char *p) {
  return static_cast<std::uint32_t>(read_u16(p)) |
         (static_cast<std::uint32_t>(read_u16(p + 2)) << 16);
}
inline void put_u16(std::string &s, std::uint16_t v) {
  s.push_back(static_cast<char>(v & 0xff));
  s.push_back(static_cast<char>(v >> 8));
}
inline void put_u32(std::string &s, std::uint32_t v) {
  put_u16(s, static_cast<std::uint16_t>(v & 0xffff));
  put_u16(s, static_cast<std::uint16_t>(v >> 16));
}

}  // namespace detail

/// Parses an in-memory RIFF/WAVE PCM-16 image. Multichannel input yields
/// channel 0. Samples are scaled by 1/32768.
inline AudioClip parse_wav(const std::string &bytes) {
  using detail::read_u16;
  using detail::read_u32;
  if (bytes.size() < 12 || bytes.compare(0, 4, "RIFF") != 0 ||
      bytes.compare(8, 4, "WAVE") != 0)
    fail(ErrorKind::kIo, "malformed header: not a RIFF/WAVE file");

  int channels = 0, bits = 0, rate = 0;
  bool have_fmt = false;
  const char *data = nullptr;
  std::size_t data_len = 0;
  bool have_data = false;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const char *chunk = bytes.data() + pos;
    std::uint32_t len = read_u32(chunk + 4);
    std::size_t body = pos + 8;
    std::size_t avail = bytes.size() - body;
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (len < 16 || avail < 16) fail(ErrorKind::kIo, "malformed header: short fmt chunk");
      const char *f = bytes.data() + body;
      std::uint16_t format = read_u16(f);
      channels = read_u16(f + 2);
      rate = static_cast<int>(read_u32(f + 4));
      bits = read_u16(f + 14);
      // WAVE_FORMAT_EXTENSIBLE carries the real format code in its GUID.
      if (format == 0xFFFE && len >= 26 && avail >= 26) format = read_u16(f + 24);
      if (format != 1 || bits != 16)
        fail(ErrorKind::kIo, "unsupported encoding: only PCM 16-bit is supported");
      if (channels < 1 || rate <= 0)
        fail(ErrorKind::kIo, "malformed header: bad channel count or rate");
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = bytes.data() + body;
      data_len = std::min<std::size_t>(len, avail);
      have_data = true;
      break;
    }
    pos = body + len + (len & 1u);
  }
  if (!have_fmt) fail(ErrorKind::kIo, "malformed header: missing fmt chunk");
  if (!have_data) fail(ErrorKind::kIo, "malformed header: missing data chunk");

  std::size_t frame_bytes = static_cast<std::size_t>(channels) * 2;
  std::size_t frames = data_len / frame_bytes;
  if (frames == 0) fail(ErrorKind::kIo, "empty audio");

  AudioClip clip;
  clip.sample_rate = rate;
  clip.samples.resize(frames);
  for (std::size_t i = 0; i < frames; ++i) {
    auto v = static_cast<std::int16_t>(read_u16(data + i * frame_bytes));
    clip.samples[i] = v / 32768.0;
  }
  return clip;
}

inline AudioClip load_wav(const std::filesystem::path &path) {
  return parse_wav(read_file(path));
}

struct SaveResult {
  std::size_t clamped = 0;  // samples with |x| > 1 that were clipped
};

/// Encodes a clip as PCM-16 mono. Out-of-range samples are clamped and
/// counted rather than rejected.
inline std::string encode_wav(const AudioClip &clip, SaveResult *result = nullptr) {
  if (clip.empty()) fail(ErrorKind::kInvalidArgument, "cannot save an empty clip");
  using detail::put_u16;
  using detail::put_u32;
  const std::uint32_t n = static_cast<std::uint32_t>(clip.size());
  std::string s;
  s.reserve(44 + 2 * n);
  s += "RIFF";
  put_u32(s, 36 + 2 * n);
  s += "WAVEfmt ";
  put_u32(s, 16);
  put_u16(s, 1);  // PCM
  put_u16(s, 1);  // mono
  put_u32(s, static_cast<std::uint32_t>(clip.sample_rate));
  put_u32(s, static_cast<std::uint32_t>(clip.sample_rate) * 2);
  put_u16(s, 2);
  put_u16(s, 16);
  s += "data";
  put_u32(s, 2 * n);
  std::size_t clamped = 0;
  for (double x : clip.samples) {
    if (std::abs(x) > 1.0) ++clamped;
    double q = std::round(std::clamp(x, -1.0, 1.0) * 32768.0);
    q = std::clamp(q, -32768.0, 32767.0);
    put_u16(s, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
  }
  if (result) result->clamped = clamped;
  return s;
}

inline SaveResult save_wav(const AudioClip &clip, const std::filesystem::path &path) {
  SaveResult r;
  std::string bytes = encode_wav(clip, &r);
  atomic_write(path, bytes);
  return r;
}

// ---------------------------------------------------------------------------
// Primitives

inline double max_abs(std::span<const double> x) {
  double m = 0.0;
  for (double v : x) m = std::max(m, std::abs(v));
  return m;
}

inline double mean_power(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return x.empty() ? 0.0 : s / static_cast<double>(x.size());
}

inline AudioClip peak_normalize(const AudioClip &clip) {
  if (clip.empty()) fail(ErrorKind::kInvalidArgument, "peak_normalize: empty clip");
  double peak = max_abs(clip.samples);
  if (peak == 0.0) fail(ErrorKind::kNumerical, "peak_normalize: all-zero input");
  AudioClip out = clip;
  if (peak == 1.0) return out;
  for (double &v : out.samples) v /= peak;
  return out;
}

inline double signal_power_db(const AudioClip &clip) {
  if (clip.empty()) fail(ErrorKind::kInvalidArgument, "signal_power_db: empty clip");
  double p = mean_power(clip.samples);
  if (p == 0.0) fail(ErrorKind::kNumerical, "signal_power_db: all-zero input");
  return 10.0 * std::log10(p);
}

/// Full linear convolution by zero-padded FFT. Output length is
/// x.size() + h.size() - 1. No normalization.
inline std::vector<double> linear_convolve(std::span<const double> x,
                                           std::span<const double> h) {
  require(!x.empty() && !h.empty(), "linear_convolve: empty input");
  const std::size_t out_len = x.size() + h.size() - 1;
  const std::size_t nfft = std::max<std::size_t>(2, next_pow2(out_len));  // kissfft fails on one point
  Eigen::FFT<double> fft;
  std::vector<double> xa(nfft, 0.0), ha(nfft, 0.0);
  std::copy(x.begin(), x.end(), xa.begin());
  std::copy(h.begin(), h.end(), ha.begin());
  std::vector<std::complex<double>> X, H;
  fft.fwd(X, xa);
  fft.fwd(H, ha);
  for (std::size_t k = 0; k < X.size(); ++k) X[k] *= H[k];
  std::vector<double> y;
  fft.inv(y, X);
  y.resize(out_len);
  return y;
}

/// Linear convolution followed by peak normalization.
inline AudioClip convolve(const AudioClip &x, const AudioClip &h) {
  if (x.sample_rate != h.sample_rate)
    fail(ErrorKind::kInvalidArgument, "convolve: sample-rate mismatch");
  AudioClip out;
  out.sample_rate = x.sample_rate;
  out.samples = linear_convolve(x.samples, h.samples);
  return peak_normalize(out);
}

/// Repeats or truncates `clip` to exactly `n` samples, starting at `offset`
/// (taken modulo the clip length).
inline std::vector<double> tile_to(std::span<const double> clip, std::size_t n,
                                   std::size_t offset = 0) {
  require(!clip.empty(), "tile_to: empty clip");
  std::vector<double> out(n);
  std::size_t j = offset % clip.size();
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = clip[j];
    if (++j == clip.size()) j = 0;
  }
  return out;
}

}  // namespace evec
