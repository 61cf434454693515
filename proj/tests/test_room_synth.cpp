// tests/test_room_synth.cpp

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

#include <cmath>
#include <map>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "evec/corpus.hpp"
#include "evec/room_synth.hpp"
#include "test_util.hpp"

namespace evec {
namespace {

// White-noise carrier under an energy envelope exp(-k t), with k set so the
// energy falls 30 dB at t30 seconds.
AudioClip exponential_ir(double t30, double seconds, std::uint64_t seed) {
  const double k = 3.0 * std::log(10.0) / t30;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  AudioClip h;
  const auto n = static_cast<std::size_t>(seconds * kSampleRate);
  for (std::size_t i = 0; i < n; ++i) {
    double t = static_cast<double>(i) / kSampleRate;
    h.samples.push_back(std::exp(-0.5 * k * t) * g(rng));
  }
  return h;
}

double window_power_db(const AudioClip &c, std::size_t begin, std::size_t len) {
  double s = 0.0;
  for (std::size_t i = begin; i < begin + len; ++i) s += c.samples[i] * c.samples[i];
  return 10.0 * std::log10(s / len);
}

TEST(EstimateT60, ExponentialDecay) {
  for (std::uint64_t seed : {1, 2, 3}) {
    T60Estimate e = estimate_t60(exponential_ir(0.150, 0.8, seed));
    EXPECT_NEAR(e.seconds, 0.300, 0.015) << seed;
    EXPECT_FALSE(e.degenerate);
  }
}

TEST(EstimateT60, DeltaIsDegenerate) {
  AudioClip d;
  d.samples.assign(400, 0.0);
  d.samples[0] = 1.0;
  T60Estimate e = estimate_t60(d);
  EXPECT_LE(e.seconds, 1.0 / kSampleRate);
  EXPECT_TRUE(e.degenerate);
  expect_error(ErrorKind::kNumerical, [&] { reshape_rir(d, 0.2); });
}

TEST(EstimateT60, TrailingSilenceBarelyMatters) {
  AudioClip h = exponential_ir(0.1, 0.5, 4);
  AudioClip padded = h;
  padded.samples.resize(h.size() + kSampleRate / 2, 0.0);
  EXPECT_LE(std::abs(estimate_t60(h).seconds - estimate_t60(padded).seconds), 1e-3);
}

TEST(EstimateT60, NoDecayIsAnError) {
  // A flat 500-sample clip ends only 27 dB down on its decay curve.
  AudioClip flat;
  flat.samples.assign(500, 0.5);
  expect_error(ErrorKind::kNumerical, [&] { estimate_t60(flat); }, "-30 dB");
}

TEST(ReshapeRir, IdentityExponent) {
  AudioClip h = peak_normalize(exponential_ir(0.2, 0.9, 5));
  double measured = estimate_t60(h).seconds;
  RirProfile p = reshape_rir(h, measured);
  EXPECT_EQ(p.alpha, 1.0);
  EXPECT_EQ(p.impulse.samples, h.samples);
}

TEST(ReshapeRir, HalvesDecayTime) {
  // T60 0.4 s carrier, reshaped to 0.2 s: alpha 2.
  AudioClip h = exponential_ir(0.2, 1.2, 6);
  RirProfile p = reshape_rir(h, 0.2);
  EXPECT_NEAR(p.alpha, 2.0, 0.2);
  EXPECT_NEAR(p.t60_measured / p.t60_target, p.alpha, 1e-12);
  double re = estimate_t60(p.impulse).seconds;
  EXPECT_GE(re, 0.18);
  EXPECT_LE(re, 0.22);
}

TEST(ReshapeRir, ShortTargetOnSurrogate) {
  AudioClip rir = synth_sources(SourceKind::kRir, 8, 0.66, SourceOptions{0.6});
  RirProfile q = reshape_rir(rir, 0.05);
  EXPECT_NEAR(estimate_t60(q.impulse).seconds, 0.05, 0.005);
}

TEST(ReshapeRir, SurrogateRoundTripOverRange) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.05, 0.5);
  for (int i = 0; i < 40; ++i) {
    double base = 0.5 + 0.4 * i / 40.0, target = u(rng);
    AudioClip rir = synth_sources(SourceKind::kRir, 100 + i, 1.1 * base, SourceOptions{base});
    RirProfile p = reshape_rir(rir, target);
    EXPECT_LE(std::abs(estimate_t60(p.impulse).seconds - target) / target, 0.10) << i;
  }
}

TEST(MixAtSnr, ClosedFormGains) {
  AudioClip s = random_clip(8000, 1), b = random_clip(8000, 2);
  // Rescale b to exactly the power of s.
  double k = std::sqrt(mean_power(s.samples) / mean_power(b.samples));
  for (double &v : b.samples) v *= k;
  EXPECT_NEAR(mix_at_snr(s, b, 0.0).gain, 1.0, 1e-12);
  EXPECT_NEAR(mix_at_snr(s, b, 10.0).gain, std::pow(10.0, -0.5), 1e-12);
}

TEST(MixAtSnr, RealizedSnrAndGainOnlyDifference) {
  AudioClip s = synth_sources(SourceKind::kSpeech, 3, 2.0);
  AudioClip b = synth_sources(SourceKind::kNonstationaryNoise, 4, 1.3);  // tiled
  Mixture m17 = mix_at_snr(s, b, 17.0, 123);
  EXPECT_NEAR(m17.realized_snr_db(), 17.0, 0.01);
  EXPECT_LE(max_abs(m17.audio.samples), 1.0 + 1e-12);
  for (std::size_t i = 0; i < s.size(); i += 97)
    EXPECT_NEAR(m17.audio.samples[i], m17.speech.samples[i] + m17.background.samples[i], 1e-12);

  Mixture m5 = mix_at_snr(s, b, 5.0, 123), m25 = mix_at_snr(s, b, 25.0, 123);
  EXPECT_NEAR(m5.gain / m25.gain, 10.0, 1e-9);
  // Stored components have the same shapes, only their scales differ.
  double rs = m5.speech.samples[100] / m25.speech.samples[100];
  double rb = m5.background.samples[100] / m25.background.samples[100];
  for (std::size_t i = 0; i < s.size(); i += 53) {
    if (std::abs(m25.speech.samples[i]) > 1e-6) {
      EXPECT_NEAR(m5.speech.samples[i] / m25.speech.samples[i], rs, 1e-9);
    }
    if (std::abs(m25.background.samples[i]) > 1e-6) {
      EXPECT_NEAR(m5.background.samples[i] / m25.background.samples[i], rb, 1e-9);
    }
  }
}

TEST(MixAtSnr, SilentInputs) {
  AudioClip s = random_clip(100, 1), z;
  z.samples.assign(100, 0.0);
  expect_error(ErrorKind::kNumerical, [&] { mix_at_snr(s, z, 10.0); });
  expect_error(ErrorKind::kNumerical, [&] { mix_at_snr(z, s, 10.0); });
}

TEST(SynthSources, StationaryAndNonstationary) {
  const std::size_t w = kSampleRate / 2;
  AudioClip st = synth_sources(SourceKind::kStationaryNoise, 11, 6.0);
  AudioClip ns = synth_sources(SourceKind::kNonstationaryNoise, 11, 6.0);
  double st_lo = 1e9, st_hi = -1e9, ns_lo = 1e9, ns_hi = -1e9;
  for (std::size_t b = 0; b + w <= st.size(); b += w) {
    double p = window_power_db(st, b, w), q = window_power_db(ns, b, w);
    st_lo = std::min(st_lo, p), st_hi = std::max(st_hi, p);
    ns_lo = std::min(ns_lo, q), ns_hi = std::max(ns_hi, q);
  }
  EXPECT_LT(st_hi - st_lo, 1.0);
  EXPECT_GT(ns_hi - ns_lo, 6.0);
}

TEST(SynthSources, RirSurrogateT60AndDeterminism) {
  AudioClip rir = synth_sources(SourceKind::kRir, 5, 0.5, SourceOptions{0.3});
  EXPECT_NEAR(estimate_t60(rir).seconds, 0.3, 0.03);
  for (SourceKind k : {SourceKind::kStationaryNoise, SourceKind::kNonstationaryNoise,
                       SourceKind::kMusic, SourceKind::kSpeech}) {
    AudioClip a = synth_sources(k, 77, 1.0), b = synth_sources(k, 77, 1.0), c = synth_sources(k, 78, 1.0);
    EXPECT_EQ(a.samples, b.samples);
    EXPECT_NE(a.samples, c.samples);
    EXPECT_EQ(a.size(), static_cast<std::size_t>(kSampleRate));
    EXPECT_LE(max_abs(a.samples), 1.0);
  }
  expect_error(ErrorKind::kInvalidArgument, [] { synth_sources(SourceKind::kMusic, 1, 0.0); });
}

RoomSpec make_spec(RoomType type, double snr = 15.0) {
  RoomSpec s;
  s.room_id = "r";
  s.room_type = type;
  s.snr_db = snr;
  s.rir = reshape_rir(synth_sources(SourceKind::kRir, 1, 0.8, SourceOptions{0.7}), 0.25);
  RoomComponents rc = components_for(type);
  if (rc.stationary) s.stationary_noise_id = SyntheticSourceBank::id(SourceKind::kStationaryNoise, 1);
  if (rc.nonstationary)
    s.nonstationary_noise_id = SyntheticSourceBank::id(SourceKind::kNonstationaryNoise, 2);
  if (rc.music) s.music_id = SyntheticSourceBank::id(SourceKind::kMusic, 3);
  return s;
}

const AudioClip &component(const Background &bg, const std::string &name) {
  for (const auto &[n, c] : bg.components)
    if (n == name) return c;
  throw std::runtime_error("no component " + name);
}

TEST(BuildBackground, EqualRatios) {
  SyntheticSourceBank bank(2.0, 2.0);
  Background bg = build_background(make_spec(RoomType::kCompleteRoom), bank);
  ASSERT_EQ(bg.components.size(), 3u);
  double total = 0.0;
  for (const auto &[n, c] : bg.components) total += mean_power(c.samples);
  for (const auto &[n, c] : bg.components) EXPECT_NEAR(mean_power(c.samples) / total, 1.0 / 3.0, 1e-6) << n;
}

TEST(BuildBackground, RoomTypeAlgebra) {
  SyntheticSourceBank bank(2.0, 2.0);
  Background full = build_background(make_spec(RoomType::kCompleteRoom), bank);
  Background no_music = build_background(make_spec(RoomType::kNoMusic), bank);
  Background no_stat = build_background(make_spec(RoomType::kNoStatNoise), bank);
  Background no_nonstat = build_background(make_spec(RoomType::kNoNonstatNoise), bank);
  Background music_rir = build_background(make_spec(RoomType::kMusicRir), bank);
  EXPECT_EQ(no_music.components.size(), 2u);
  EXPECT_EQ(music_rir.components.size(), 1u);
  const AudioClip &stat = component(full, "stationary");
  const AudioClip &music = component(full, "music");
  const AudioClip &nonstat = component(full, "nonstationary");
  std::vector<double> sn(full.audio.size());
  for (std::size_t i = 0; i < full.audio.size(); ++i) {
    EXPECT_NEAR(full.audio.samples[i] - no_stat.audio.samples[i], stat.samples[i], 1e-12);
    EXPECT_NEAR(full.audio.samples[i] - no_music.audio.samples[i], music.samples[i], 1e-12);
    EXPECT_NEAR(full.audio.samples[i] - no_nonstat.audio.samples[i], nonstat.samples[i], 1e-12);
    sn[i] = stat.samples[i] + nonstat.samples[i];
  }
  EXPECT_NEAR(mean_power(no_music.audio.samples), mean_power(sn), 1e-12);

  // music_rir: the music alone, passed through the room response.
  SyntheticSourceBank b2(2.0, 2.0);
  RoomSpec mr = make_spec(RoomType::kMusicRir);
  AudioClip wet = convolve(b2(*mr.music_id), mr.rir.impulse);
  std::vector<double> x = tile_to(wet.samples, music_rir.audio.size());
  double g = 1.0 / std::sqrt(mean_power(x));
  for (std::size_t i = 0; i < x.size(); i += 31) EXPECT_NEAR(music_rir.audio.samples[i], g * x[i], 1e-12);
}

TEST(BuildBackground, UnresolvableId) {
  SyntheticSourceBank bank(1.0, 1.0);
  RoomSpec s = make_spec(RoomType::kNoMusic);
  s.stationary_noise_id = "bogus:12";
  expect_error(ErrorKind::kInvalidArgument, [&] { build_background(s, bank); }, "bogus");
}

TEST(RealizeRoomInstance, DeterministicAndExact) {
  SyntheticSourceBank bank(3.0, 2.0);
  RoomSpec spec = make_spec(RoomType::kCompleteRoom, 21.5);
  AudioClip speech = synth_sources(SourceKind::kSpeech, 9, 2.0);
  RoomInstance a = realize_room_instance(spec, speech, bank, 42);
  RoomInstance b = realize_room_instance(spec, speech, bank, 42);
  EXPECT_EQ(a.audio.samples, b.audio.samples);
  EXPECT_NEAR(a.realized_snr_db, 21.5, 0.01);
  EXPECT_EQ(a.labels.room_id, "r");
  EXPECT_EQ(a.labels.t60_s, 0.25);
  EXPECT_EQ(a.audio.size(), speech.size() + spec.rir.impulse.size() - 1);
  RoomInstance c = realize_room_instance(spec, speech, bank, 43);
  EXPECT_NE(a.audio.samples, c.audio.samples);
}

TEST(RoomSpec, Validation) {
  RoomSpec s = make_spec(RoomType::kNoMusic);
  s.music_id = "music:1";
  expect_error(ErrorKind::kInvalidArgument, [&] { s.validate(); }, "component ids");
  RoomSpec t = make_spec(RoomType::kNoMusic, 30.0);
  expect_error(ErrorKind::kInvalidArgument, [&] { t.validate(); });
  EXPECT_EQ(parse_room_type("music_rir"), RoomType::kMusicRir);
  expect_error(ErrorKind::kInvalidArgument, [] { parse_room_type("attic"); });
}

TEST(Corpus, PlanCounts) {
  CorpusConfig cfg;  // desk defaults
  CorpusPlan plan = plan_corpus(cfg);
  std::map<std::string, int> splits;
  std::map<std::string, int> train_per_room, test_per_room;
  for (const auto &ip : plan.instances) {
    ++splits[ip.split];
    if (ip.split == "train") ++train_per_room[plan.rooms[ip.room].spec.room_id];
    if (ip.split == "test") ++test_per_room[plan.rooms[ip.room].spec.room_id];
  }
  EXPECT_EQ(splits["train"], 400);
  EXPECT_EQ(splits["test"], 400);
  EXPECT_EQ(splits["enroll"], 400);
  EXPECT_EQ(splits["val"], 100);
  EXPECT_EQ(train_per_room.size(), 40u);
  for (auto &[r, n] : train_per_room) EXPECT_EQ(n, 10) << r;
  EXPECT_EQ(test_per_room.size(), 100u);
  for (auto &[r, n] : test_per_room) EXPECT_EQ(n, 4) << r;
  std::set<std::string> speech;
  for (const auto &ip : plan.instances) speech.insert(ip.speech_id);
  EXPECT_EQ(speech.size(), plan.instances.size());
  for (const auto &rp : plan.rooms) {
    EXPECT_GE(rp.spec.snr_db, 5.0);
    EXPECT_LE(rp.spec.snr_db, 25.0);
    EXPECT_GE(rp.spec.rir.t60_target, 0.05);
    EXPECT_LE(rp.spec.rir.t60_target, 0.5);
  }
  EXPECT_LE(max_t60_relative_error(plan), 0.10);
}

TEST(Corpus, GenerateSmallTwice) {
  CorpusConfig cfg;
  cfg.train_rooms = 2;
  cfg.instances_per_room = 2;
  cfg.val_rooms = 1;
  cfg.val_instances_per_room = 1;
  cfg.enroll_test_rooms_per_type = 1;
  cfg.enroll_instances_per_room = 1;
  cfg.test_instances_per_room = 1;
  cfg.duration_s = cfg.test_duration_s = 1.0;
  cfg.background_duration_s = 1.5;
  cfg.seed = 5;
  TempDir a, b;
  CorpusSummary sa = generate_corpus(cfg, a.path(), 2);
  CorpusSummary sb = generate_corpus(cfg, b.path(), 1);
  EXPECT_EQ(read_file(sa.manifest), read_file(sb.manifest));
  EXPECT_LE(sa.max_snr_error_db, 0.01);
  EXPECT_LE(sa.max_t60_rel_error, 0.10);
  auto records = read_manifest(sa.manifest);
  EXPECT_EQ(records.size(), 4u + 1u + 10u);
  for (const auto &r : records) {
    EXPECT_TRUE(std::filesystem::exists(a.path() / r.path)) << r.path;
    EXPECT_EQ(read_file(a.path() / r.path), read_file(b.path() / r.path));
  }
  EXPECT_EQ(parse_manifest_line(to_json_line(records[3])).speech_id, records[3].speech_id);
}

TEST(Corpus, UnwritableOutput) {
  CorpusConfig cfg;
  cfg.train_rooms = 1;
  cfg.instances_per_room = 1;
  cfg.val_rooms = 0;
  cfg.enroll_test_rooms_per_type = 0;
  cfg.duration_s = 1.0;
  expect_error(ErrorKind::kIo, [&] { generate_corpus(cfg, "/proc/evec-no-such-dir"); });
  cfg.train_rooms = 0;
  expect_error(ErrorKind::kInvalidArgument, [&] { plan_corpus(cfg); });
}

}  // namespace
}  // namespace evec
