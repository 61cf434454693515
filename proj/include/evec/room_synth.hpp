// evec/room_synth.hpp

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

// Virtual-room construction: reverberation-time estimation and reshaping of
// impulse responses, exact-SNR mixing, background assembly per room type,
// and the bundled synthetic sources that stand in for recorded corpora.

#pragma once

#include <array>
#include <charconv>
#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "evec/audio.hpp"
#include "evec/common.hpp"

namespace evec {

// ---------------------------------------------------------------------------
// Reverberation time

struct T60Estimate {
  double seconds = 0.0;
  bool degenerate = false;  // decay was immediate (e.g. a bare delta)
};

/// Doubles the 30 dB decay time of the Schroeder backward-integrated energy
/// curve of the peak-normalized impulse. The -30 dB crossing is linearly
/// interpolated between samples.
inline T60Estimate estimate_t60(const AudioClip &impulse) {
  AudioClip h = peak_normalize(impulse);
  const std::size_t n = h.size();
  std::vector<double> edc(n);
  double acc = 0.0;
  for (std::size_t i = n; i-- > 0;) {
    acc += h.samples[i] * h.samples[i];
    edc[i] = acc;
  }
  const double total = edc[0];
  auto level_db = [&](std::size_t i) {
    return edc[i] > 0.0 ? 10.0 * std::log10(edc[i] / total)
                        : -std::numeric_limits<double>::infinity();
  };
  for (std::size_t i = 1; i < n; ++i) {
    double d1 = level_db(i);
    if (d1 > -30.0) continue;
    double d0 = level_db(i - 1);
    double frac = std::isinf(d1) ? 0.0 : (-30.0 - d0) / (d1 - d0);
    double t30 = (static_cast<double>(i - 1) + frac) / h.sample_rate;
    T60Estimate est;
    est.seconds = 2.0 * t30;
    est.degenerate = est.seconds < 1e-3;
    return est;
  }
  fail(ErrorKind::kNumerical,
       "estimate_t60: energy decay never reaches -30 dB within the clip");
}

struct RirProfile {
  AudioClip impulse;  // reshaped, peak-normalized
  double t60_measured = 0.0;
  double t60_target = 0.0;
  double alpha = 1.0;  // t60_measured / t60_target
};

/// Rescales the decay time of an impulse response by raising it to the
/// signed power alpha = T60_measured / T60_target, i.e. sign(h)|h|^alpha.
/// For an exponential envelope this divides the decay constant by alpha.
inline RirProfile reshape_rir(const AudioClip &impulse, double t60_target) {
  require(t60_target > 0.0, "reshape_rir: t60_target must be positive");
  T60Estimate est = estimate_t60(impulse);
  if (est.degenerate)
    fail(ErrorKind::kNumerical, "reshape_rir: impulse has no measurable decay");
  RirProfile out;
  out.t60_measured = est.seconds;
  out.t60_target = t60_target;
  out.alpha = est.seconds / t60_target;
  out.impulse = peak_normalize(impulse);
  if (out.alpha != 1.0) {
    for (double &v : out.impulse.samples)
      v = std::copysign(std::pow(std::abs(v), out.alpha), v);
  }
  return out;
}

// ---------------------------------------------------------------------------
// SNR mixing

/// A mixture together with the two scaled components it is the sum of.
struct Mixture {
  AudioClip audio;
  AudioClip speech;      // speech component as stored in `audio`
  AudioClip background;  // gain-scaled background as stored in `audio`
  double gain = 1.0;     // background gain before peak normalization

  double realized_snr_db() const {
    return 10.0 * std::log10(mean_power(speech.samples) /
                             mean_power(background.samples));
  }
};

/// speech + g * background with g chosen so the power ratio is exactly
/// snr_db. The background is tiled or truncated to the speech length,
/// starting at `offset`. The sum is peak-normalized; both stored components
/// carry the same normalization factor.
inline Mixture mix_at_snr(const AudioClip &speech, const AudioClip &background,
                          double snr_db, std::size_t offset = 0) {
  if (speech.sample_rate != background.sample_rate)
    fail(ErrorKind::kInvalidArgument, "mix_at_snr: sample-rate mismatch");
  require(!speech.empty() && !background.empty(), "mix_at_snr: empty input");
  std::vector<double> bg = tile_to(background.samples, speech.size(), offset);
  const double ps = mean_power(speech.samples);
  const double pb = mean_power(bg);
  if (ps == 0.0 || pb == 0.0)
    fail(ErrorKind::kNumerical, "mix_at_snr: zero-power speech or background");

  Mixture m;
  m.gain = std::sqrt(ps / (pb * std::pow(10.0, snr_db / 10.0)));
  m.speech = speech;
  m.background.sample_rate = speech.sample_rate;
  m.background.samples = std::move(bg);
  for (double &v : m.background.samples) v *= m.gain;

  m.audio.sample_rate = speech.sample_rate;
  m.audio.samples.resize(speech.size());
  for (std::size_t i = 0; i < speech.size(); ++i)
    m.audio.samples[i] = m.speech.samples[i] + m.background.samples[i];
  const double peak = max_abs(m.audio.samples);
  if (peak == 0.0) fail(ErrorKind::kNumerical, "mix_at_snr: mixture cancelled to zero");
  for (std::size_t i = 0; i < speech.size(); ++i) {
    m.audio.samples[i] /= peak;
    m.speech.samples[i] /= peak;
    m.background.samples[i] /= peak;
  }
  return m;
}

// ---------------------------------------------------------------------------
// Synthetic sources

enum class SourceKind {
  kStationaryNoise,
  kNonstationaryNoise,
  kMusic,
  kSpeech,
  kRir,
};

struct SourceOptions {
  /// Decay time for kRir; <= 0 draws one from [0.5, 0.9] s using the seed.
  double rir_t60 = 0.0;
};

namespace detail {

/// Smooth random log-spectral envelope: a tilt plus a few log-frequency bumps.
struct SpectralShape {
  double tilt_db_per_octave = 0.0;
  std::array<double, 3> centre_hz{};
  std::array<double, 3> gain_db{};
  std::array<double, 3> width_oct{};
  double low_cut_hz = 50.0;

  double gain(double f) const {
    if (f < low_cut_hz) return 0.0;
    double oct = std::log2(f / 1000.0);
    double db = tilt_db_per_octave * oct;
    for (std::size_t i = 0; i < centre_hz.size(); ++i) {
      double d = std::log2(f / centre_hz[i]) / width_oct[i];
      db += gain_db[i] * std::exp(-0.5 * d * d);
    }
    return std::pow(10.0, db / 20.0);
  }
};

inline double uniform(std::mt19937_64 &rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline double log_uniform(std::mt19937_64 &rng, double lo, double hi) {
  return std::exp(uniform(rng, std::log(lo), std::log(hi)));
}

/// `broadband` keeps the bumps mild and wide, so short windows of the noise
/// carry many degrees of freedom and their power barely fluctuates.
inline SpectralShape random_shape(std::mt19937_64 &rng, bool broadband = false) {
  SpectralShape s;
  s.tilt_db_per_octave = broadband ? uniform(rng, -3.0, 1.0) : uniform(rng, -6.0, 2.0);
  for (std::size_t i = 0; i < 3; ++i) {
    s.centre_hz[i] = log_uniform(rng, 150.0, 6000.0);
    s.gain_db[i] = broadband ? uniform(rng, -6.0, 6.0) : uniform(rng, -8.0, 14.0);
    s.width_oct[i] = broadband ? uniform(rng, 0.8, 1.5) : uniform(rng, 0.3, 1.2);
  }
  s.low_cut_hz = uniform(rng, 40.0, 120.0);
  return s;
}

/// Gaussian noise of length n coloured by `shape`, scaled to unit power.
inline std::vector<double> shaped_noise(std::mt19937_64 &rng, std::size_t n,
                                        const SpectralShape &shape) {
  const std::size_t nfft = next_pow2(n);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> white(nfft);
  for (double &v : white) v = gauss(rng);
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> spec;
  fft.fwd(spec, white);
  for (std::size_t k = 0; k < nfft; ++k) {
    std::size_t kk = k <= nfft / 2 ? k : nfft - k;
    double f = static_cast<double>(kk) * kSampleRate / static_cast<double>(nfft);
    spec[k] *= shape.gain(f);
  }
  std::vector<double> out;
  fft.inv(out, spec);
  out.resize(n);
  double p = mean_power(out);
  if (p > 0.0) {
    double g = 1.0 / std::sqrt(p);
    for (double &v : out) v *= g;
  }
  return out;
}

inline AudioClip finish(std::vector<double> samples) {
  AudioClip clip;
  clip.samples = std::move(samples);
  return peak_normalize(clip);
}

inline AudioClip synth_stationary(std::mt19937_64 &rng, std::size_t n) {
  SpectralShape shape = random_shape(rng, true);
  return finish(shaped_noise(rng, n, shape));
}

inline AudioClip synth_nonstationary(std::mt19937_64 &rng, std::size_t n) {
  SpectralShape shape = random_shape(rng);
  std::vector<double> x = shaped_noise(rng, n, shape);
  // Gate schedule: short bursts at random levels separated by near-silent gaps.
  std::vector<double> gate(n, 0.0);
  const std::size_t ramp = kSampleRate / 200;  // 5 ms
  std::size_t pos = static_cast<std::size_t>(uniform(rng, 0.0, 0.3) * kSampleRate);
  std::fill(gate.begin(), gate.begin() + std::min(pos, n), 0.01);
  while (pos < n) {
    std::size_t on = static_cast<std::size_t>(uniform(rng, 0.05, 0.35) * kSampleRate);
    std::size_t off = static_cast<std::size_t>(uniform(rng, 0.15, 0.7) * kSampleRate);
    double level = uniform(rng, 0.4, 1.0);
    for (std::size_t i = 0; i < on && pos + i < n; ++i) {
      double r = 1.0;
      if (i < ramp) r = static_cast<double>(i) / ramp;
      if (on - i < ramp) r = std::min(r, static_cast<double>(on - i) / ramp);
      gate[pos + i] = std::max(0.01, level * r);
    }
    pos += on;
    for (std::size_t i = 0; i < off && pos + i < n; ++i) gate[pos + i] = 0.01;
    pos += off;
  }
  for (std::size_t i = 0; i < n; ++i) x[i] *= gate[i];
  return finish(std::move(x));
}

inline AudioClip synth_music(std::mt19937_64 &rng, std::size_t n) {
  static constexpr std::array<int, 7> kMajor{0, 2, 4, 5, 7, 9, 11};
  static constexpr std::array<int, 7> kMinor{0, 2, 3, 5, 7, 8, 10};
  const auto &scale = uniform(rng, 0.0, 1.0) < 0.5 ? kMajor : kMinor;
  const double base = log_uniform(rng, 110.0, 440.0);
  const double rolloff = uniform(rng, 0.7, 2.0);
  const double decay = uniform(rng, 0.15, 0.6);
  const double note_min = uniform(rng, 0.12, 0.25);
  const double note_max = note_min + uniform(rng, 0.1, 0.4);
  constexpr int kHarmonics = 5;
  const double two_pi = 2.0 * std::numbers::pi;

  std::vector<double> out(n, 0.0);
  for (int voice = 0; voice < 2; ++voice) {
    const double octave = voice == 0 ? 1.0 : 0.5;
    const double voice_gain = voice == 0 ? 1.0 : 0.6;
    std::size_t pos = 0;
    while (pos < n) {
      std::size_t len = static_cast<std::size_t>(uniform(rng, note_min, note_max) * kSampleRate);
      int degree = std::uniform_int_distribution<int>(0, 13)(rng);
      int semis = scale[degree % 7] + 12 * (degree / 7);
      double f0 = base * octave * std::pow(2.0, semis / 12.0);
      std::array<double, kHarmonics> phase;
      for (double &p : phase) p = uniform(rng, 0.0, two_pi);
      std::size_t tail = std::min(n - pos, len + kSampleRate / 10);
      for (std::size_t i = 0; i < tail; ++i) {
        double t = static_cast<double>(i) / kSampleRate;
        double env = (1.0 - std::exp(-t / 0.01)) * std::exp(-t / decay);
        if (i >= len) env *= 1.0 - static_cast<double>(i - len) / (tail - len + 1);
        double s = 0.0;
        for (int h = 1; h <= kHarmonics; ++h) {
          double fh = f0 * h;
          if (fh >= 0.45 * kSampleRate) break;
          s += std::pow(h, -rolloff) * std::sin(two_pi * fh * t + phase[h - 1]);
        }
        out[pos + i] += voice_gain * env * s;
      }
      pos += len;
    }
  }
  return finish(std::move(out));
}

/// Two-pole resonator with per-sample retunable centre and bandwidth.
struct Resonator {
  double y1 = 0.0, y2 = 0.0;
  double step(double x, double freq, double bw) {
    double r = std::exp(-std::numbers::pi * bw / kSampleRate);
    double theta = 2.0 * std::numbers::pi * freq / kSampleRate;
    double y = (1.0 - r) * x + 2.0 * r * std::cos(theta) * y1 - r * r * y2;
    y2 = y1;
    y1 = y;
    return y;
  }
};

inline AudioClip synth_speech(std::mt19937_64 &rng, std::size_t n) {
  // F1-F3 for a handful of vowels (adult male reference values).
  static constexpr std::array<std::array<double, 3>, 6> kVowels{{
      {730, 1090, 2440},
      {270, 2290, 3010},
      {300, 870, 2240},
      {530, 1840, 2480},
      {570, 840, 2410},
      {660, 1720, 2410},
  }};
  static constexpr std::array<double, 3> kBandwidth{70.0, 100.0, 150.0};
  const double f0_mean = log_uniform(rng, 85.0, 255.0);
  const double tract = uniform(rng, 0.85, 1.2);
  const double breath = uniform(rng, 0.02, 0.1);
  const double vibrato_phase = uniform(rng, 0.0, 6.28);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick(0, kVowels.size() - 1);

  std::vector<double> out(n, 0.0);
  std::array<Resonator, 3> tract_filter;
  Resonator fricative_filter;
  std::array<double, 3> prev = kVowels[pick(rng)];
  for (double &f : prev) f *= tract;
  double glottal = 0.0, lp = 0.0;
  std::size_t pos = 0;
  while (pos < n) {
    std::size_t len = static_cast<std::size_t>(uniform(rng, 0.08, 0.3) * kSampleRate);
    double kind = uniform(rng, 0.0, 1.0);
    double level = uniform(rng, 0.3, 1.0);
    std::array<double, 3> target = kVowels[pick(rng)];
    for (double &f : target) f *= tract;
    double fric_freq = uniform(rng, 3000.0, 6500.0);
    for (std::size_t i = 0; i < len && pos < n; ++i, ++pos) {
      double t = static_cast<double>(i) / len;
      // 15 ms raised-cosine onset and offset around a flat nucleus
      const double ramp = std::min(0.5, 0.015 * kSampleRate / static_cast<double>(len));
      double env = t < ramp ? 0.5 - 0.5 * std::cos(std::numbers::pi * t / ramp)
                 : t > 1.0 - ramp ? 0.5 - 0.5 * std::cos(std::numbers::pi * (1.0 - t) / ramp)
                                  : 1.0;
      double y = 0.0;
      if (kind < 0.3) {
        // pause; the tract filters ring down on zero input
        double x = 0.0;
        for (int k = 0; k < 3; ++k) x = tract_filter[k].step(x, prev[k], kBandwidth[k]);
      } else if (kind < 0.42) {
        y = 0.3 * fricative_filter.step(gauss(rng), fric_freq, 1500.0);
        y *= env * level;
      } else {
        double f0 = f0_mean *
                    (1.0 + 0.06 * std::sin(2.0 * std::numbers::pi * 3.0 * pos / kSampleRate +
                                           vibrato_phase)) *
                    (1.0 - 0.1 * t);
        glottal += f0 / kSampleRate;
        double exc = 0.0;
        if (glottal >= 1.0) {
          glottal -= 1.0;
          exc = 1.0;
        }
        lp = 0.9 * lp + exc;  // glottal spectral tilt
        double x = lp + breath * gauss(rng);
        for (int k = 0; k < 3; ++k) {
          double f = prev[k] + (target[k] - prev[k]) * t;
          x = tract_filter[k].step(x, f, kBandwidth[k]);
        }
        y = env * level * x;
      }
      out[pos] = y;
    }
    if (kind >= 0.42) prev = target;
  }
  return finish(std::move(out));
}

inline AudioClip synth_rir(std::mt19937_64 &rng, std::size_t n, double t60) {
  if (t60 <= 0.0) t60 = uniform(rng, 0.5, 0.9);
  require(n >= 2, "rir surrogate needs at least two samples");
  // Amplitude decays as exp(-i / tau), i.e. energy falls 60 dB over t60.
  const double tau = t60 * kSampleRate / (3.0 * std::log(10.0));
  SpectralShape shape = random_shape(rng);
  std::vector<double> carrier = shaped_noise(rng, n, shape);
  // Early reflections dominate the sign pattern of the first ~30 ms.
  int reflections = std::uniform_int_distribution<int>(3, 7)(rng);
  constexpr std::size_t kBump = 16;
  for (int r = 0; r < reflections; ++r) {
    auto delay = static_cast<std::size_t>(uniform(rng, 0.002, 0.025) * kSampleRate);
    double amp = uniform(rng, 1.0, 3.0) * (uniform(rng, 0.0, 1.0) < 0.5 ? -1.0 : 1.0);
    for (std::size_t k = 0; k < kBump && delay + k < n; ++k)
      carrier[delay + k] += amp * std::sin(std::numbers::pi * (k + 0.5) / kBump);
  }
  // Unit-magnitude carrier: |h| is exactly the exponential envelope, so
  // reshaping by a signed power keeps the decay exactly exponential.
  std::vector<double> h(n);
  h[0] = 1.0;
  for (std::size_t i = 1; i < n; ++i)
    h[i] = (carrier[i] < 0.0 ? -1.0 : 1.0) * std::exp(-static_cast<double>(i) / tau);
  AudioClip clip;
  clip.samples = std::move(h);
  return clip;
}

}  // namespace detail

/// Deterministic stand-in sources. `duration` is in seconds; for kRir it is
/// the impulse length.
inline AudioClip synth_sources(SourceKind kind, std::uint64_t seed, double duration,
                               const SourceOptions &opt = {}) {
  require(duration > 0.0, "synth_sources: duration must be positive");
  std::size_t n = static_cast<std::size_t>(std::llround(duration * kSampleRate));
  require(n > 0, "synth_sources: duration shorter than one sample");
  std::mt19937_64 rng(derive_seed(seed, static_cast<int>(kind)));
  switch (kind) {
    case SourceKind::kStationaryNoise: return detail::synth_stationary(rng, n);
    case SourceKind::kNonstationaryNoise: return detail::synth_nonstationary(rng, n);
    case SourceKind::kMusic: return detail::synth_music(rng, n);
    case SourceKind::kSpeech: return detail::synth_speech(rng, n);
    case SourceKind::kRir: return detail::synth_rir(rng, n, opt.rir_t60);
  }
  fail(ErrorKind::kInvalidArgument, "synth_sources: unknown kind");
}

// ---------------------------------------------------------------------------
// Rooms

enum class RoomType {
  kCompleteRoom,
  kNoMusic,
  kMusicRir,
  kNoStatNoise,
  kNoNonstatNoise,
};

inline constexpr std::array<RoomType, 5> kAllRoomTypes{
    RoomType::kCompleteRoom, RoomType::kNoMusic, RoomType::kMusicRir,
    RoomType::kNoStatNoise, RoomType::kNoNonstatNoise};

inline std::string to_string(RoomType t) {
  switch (t) {
    case RoomType::kCompleteRoom: return "complete_room";
    case RoomType::kNoMusic: return "no_music";
    case RoomType::kMusicRir: return "music_rir";
    case RoomType::kNoStatNoise: return "no_stat_noise";
    case RoomType::kNoNonstatNoise: return "no_nonstat_noise";
  }
  return "?";
}

inline RoomType parse_room_type(std::string_view s) {
  for (RoomType t : kAllRoomTypes)
    if (to_string(t) == s) return t;
  fail(ErrorKind::kInvalidArgument, "unknown room type: " + std::string(s));
}

struct RoomComponents {
  bool stationary = false;
  bool nonstationary = false;
  bool music = false;
  bool music_through_rir = false;
};

inline RoomComponents components_for(RoomType t) {
  switch (t) {
    case RoomType::kCompleteRoom: return {true, true, true, false};
    case RoomType::kNoMusic: return {true, true, false, false};
    case RoomType::kMusicRir: return {false, false, true, true};
    case RoomType::kNoStatNoise: return {false, true, true, false};
    case RoomType::kNoNonstatNoise: return {true, false, true, false};
  }
  return {};
}

struct RoomSpec {
  std::string room_id;
  RoomType room_type = RoomType::kCompleteRoom;
  RirProfile rir;
  std::optional<std::string> stationary_noise_id;
  std::optional<std::string> nonstationary_noise_id;
  std::optional<std::string> music_id;
  double snr_db = 15.0;

  void validate() const {
    require(!room_id.empty(), "room spec: empty room_id");
    require(snr_db >= 5.0 && snr_db <= 25.0, "room spec: snr_db outside [5, 25]");
    require(rir.t60_target >= 0.05 && rir.t60_target <= 0.5,
            "room spec: t60 target outside [0.05, 0.5] s");
    require(rir.t60_measured > 0.0 && !rir.impulse.empty(), "room spec: missing RIR");
    RoomComponents c = components_for(room_type);
    require(c.stationary == stationary_noise_id.has_value() &&
                c.nonstationary == nonstationary_noise_id.has_value() &&
                c.music == music_id.has_value(),
            "room spec: component ids do not match room type " + to_string(room_type));
  }
};

/// Resolves a source identifier to audio. Throws Error for unknown ids.
using SourceLookup = std::function<AudioClip(const std::string &)>;

/// Resolves ids of the form "<kind>:<seed>" with kind in
/// {stat, nonstat, music, speech} to the bundled generators.
class SyntheticSourceBank {
 public:
  SyntheticSourceBank(double background_seconds, double speech_seconds)
      : background_seconds_(background_seconds), speech_seconds_(speech_seconds) {}

  static std::string id(SourceKind kind, std::uint64_t seed) {
    return std::string(prefix(kind)) + ":" + std::to_string(seed);
  }

  AudioClip operator()(const std::string &id) const {
    auto colon = id.find(':');
    if (colon == std::string::npos) unresolved(id);
    std::string_view head(id.data(), colon);
    std::uint64_t seed = 0;
    const char *b = id.data() + colon + 1, *e = id.data() + id.size();
    auto [ptr, ec] = std::from_chars(b, e, seed);
    if (ec != std::errc() || ptr != e || b == e) unresolved(id);
    for (SourceKind k : {SourceKind::kStationaryNoise, SourceKind::kNonstationaryNoise,
                         SourceKind::kMusic, SourceKind::kSpeech}) {
      if (head == prefix(k))
        return synth_sources(k, seed,
                             k == SourceKind::kSpeech ? speech_seconds_ : background_seconds_);
    }
    unresolved(id);
  }

 private:
  static constexpr std::string_view prefix(SourceKind k) {
    switch (k) {
      case SourceKind::kStationaryNoise: return "stat";
      case SourceKind::kNonstationaryNoise: return "nonstat";
      case SourceKind::kMusic: return "music";
      case SourceKind::kSpeech: return "speech";
      case SourceKind::kRir: return "rir";
    }
    return "";
  }
  [[noreturn]] static void unresolved(const std::string &id) {
    fail(ErrorKind::kInvalidArgument, "unresolvable source id: " + id);
  }
  double background_seconds_;
  double speech_seconds_;
};

/// Resolves an id to <root>/<id>.wav, for users who bring recorded corpora.
class DirectorySourceBank {
 public:
  explicit DirectorySourceBank(std::filesystem::path root) : root_(std::move(root)) {}
  AudioClip operator()(const std::string &id) const {
    std::filesystem::path p = root_ / (id + ".wav");
    if (!std::filesystem::exists(p))
      fail(ErrorKind::kInvalidArgument, "unresolvable source id: " + id);
    return load_wav(p);
  }

 private:
  std::filesystem::path root_;
};

struct Background {
  AudioClip audio;
  /// (component name, unit-power component as summed into `audio`)
  std::vector<std::pair<std::string, AudioClip>> components;
};

/// Sums the room's background components after scaling each to unit power.
/// Components of unequal length are tiled to the longest one. In music_rir
/// rooms the music is first convolved with the room's impulse response.
inline Background build_background(const RoomSpec &spec, const SourceLookup &sources) {
  RoomComponents rc = components_for(spec.room_type);
  std::vector<std::pair<std::string, AudioClip>> parts;
  auto fetch = [&](const std::optional<std::string> &id, const char *name) {
    if (!id) fail(ErrorKind::kInvalidArgument,
                  std::string("build_background: missing ") + name + " id");
    parts.emplace_back(name, sources(*id));
  };
  if (rc.stationary) fetch(spec.stationary_noise_id, "stationary");
  if (rc.nonstationary) fetch(spec.nonstationary_noise_id, "nonstationary");
  if (rc.music) {
    fetch(spec.music_id, "music");
    if (rc.music_through_rir) parts.back().second = convolve(parts.back().second, spec.rir.impulse);
  }
  if (parts.empty()) fail(ErrorKind::kInvalidArgument, "build_background: no components");

  std::size_t len = 0;
  for (auto &[name, clip] : parts) len = std::max(len, clip.size());
  Background bg;
  bg.audio.samples.assign(len, 0.0);
  for (auto &[name, clip] : parts) {
    std::vector<double> x = tile_to(clip.samples, len);
    double p = mean_power(x);
    if (p == 0.0) fail(ErrorKind::kNumerical, "build_background: silent " + name + " source");
    double g = 1.0 / std::sqrt(p);
    for (double &v : x) v *= g;
    for (std::size_t i = 0; i < len; ++i) bg.audio.samples[i] += x[i];
    AudioClip c;
    c.samples = std::move(x);
    bg.components.emplace_back(name, std::move(c));
  }
  return bg;
}

struct InstanceLabels {
  std::string room_id;
  double snr_db = 0.0;
  double t60_s = 0.0;
};

struct RoomInstance {
  std::string speech_id;
  RoomType room_type = RoomType::kCompleteRoom;
  AudioClip audio;
  InstanceLabels labels;
  double realized_snr_db = 0.0;  // measured from the stored components
};

/// Reverberates `speech` with the room's impulse response and mixes it with
/// a prebuilt room background at the room SNR. The seed picks the background
/// start offset, so instances of one room differ by speech and background
/// segment.
inline RoomInstance realize_room_instance(const RoomSpec &spec, const AudioClip &speech,
                                          const Background &background, std::uint64_t seed,
                                          std::string speech_id = {}) {
  spec.validate();
  require(!speech.empty(), "realize_room_instance: empty speech");
  AudioClip reverberant = convolve(speech, spec.rir.impulse);
  std::size_t offset = derive_seed(seed, 0x6267) % background.audio.size();
  Mixture mix = mix_at_snr(reverberant, background.audio, spec.snr_db, offset);

  RoomInstance inst;
  inst.speech_id = std::move(speech_id);
  inst.room_type = spec.room_type;
  inst.realized_snr_db = mix.realized_snr_db();
  if (std::abs(inst.realized_snr_db - spec.snr_db) > 0.01)
    fail(ErrorKind::kNumerical, "realize_room_instance: realized SNR off target for " +
                                    spec.room_id);
  inst.audio = std::move(mix.audio);
  inst.labels = {spec.room_id, spec.snr_db, spec.rir.t60_target};
  return inst;
}

inline RoomInstance realize_room_instance(const RoomSpec &spec, const AudioClip &speech,
                                          const SourceLookup &sources, std::uint64_t seed,
                                          std::string speech_id = {}) {
  spec.validate();
  return realize_room_instance(spec, speech, build_background(spec, sources), seed,
                               std::move(speech_id));
}

}  // namespace evec
