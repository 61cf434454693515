// evec/corpus.hpp

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

// Labeled virtual-room corpus: room drawing, instance realization, WAV
// output and the JSON-lines manifest.
//
// Splits:
//   train   complete rooms, `instances_per_room` utterances each
//   val     complete rooms, `val_instances_per_room` utterances each
//   enroll  per room type, `enroll_instances_per_room` utterances per room
//   test    same rooms as enroll, `test_instances_per_room` utterances each

#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <map>
#include <mutex>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "evec/audio.hpp"
#include "evec/common.hpp"
#include "evec/room_synth.hpp"

namespace evec {

struct CorpusConfig {
  int train_rooms = 40;
  int instances_per_room = 10;
  int val_rooms = 20;
  int val_instances_per_room = 5;
  int enroll_test_rooms_per_type = 20;
  int enroll_instances_per_room = 4;
  int test_instances_per_room = 4;
  double duration_s = 3.0;       // train / val speech length
  double test_duration_s = 3.0;  // enroll / test speech length
  double background_duration_s = 6.0;
  std::vector<RoomType> room_types{kAllRoomTypes.begin(), kAllRoomTypes.end()};
  std::uint64_t seed = 1;

  void validate() const {
    require(train_rooms > 0 && instances_per_room > 0,
            "corpus config: train split needs rooms and instances");
    require(val_rooms >= 0 && val_instances_per_room >= 0 &&
                enroll_test_rooms_per_type >= 0 && enroll_instances_per_room >= 0 &&
                test_instances_per_room >= 0,
            "corpus config: negative count");
    require(duration_s > 0.0 && test_duration_s > 0.0 && background_duration_s > 0.0,
            "corpus config: durations must be positive");
  }
};

inline constexpr double kMinSnrDb = 5.0, kMaxSnrDb = 25.0;
inline constexpr double kMinT60 = 0.05, kMaxT60 = 0.5;

struct ManifestRecord {
  std::string path;  // relative to the manifest's directory
  std::string room_id;
  RoomType room_type = RoomType::kCompleteRoom;
  std::string split;  // train | val | enroll | test
  double snr_db = 0.0;
  double t60_s = 0.0;
  std::string speech_id;
  std::uint64_t seed = 0;
};

inline std::string to_json_line(const ManifestRecord &r) {
  nlohmann::ordered_json j;
  j["path"] = r.path;
  j["room_id"] = r.room_id;
  j["room_type"] = to_string(r.room_type);
  j["split"] = r.split;
  j["snr_db"] = r.snr_db;
  j["t60_s"] = r.t60_s;
  j["speech_id"] = r.speech_id;
  j["seed"] = r.seed;
  return j.dump();
}

inline ManifestRecord parse_manifest_line(const std::string &line) {
  try {
    auto j = nlohmann::json::parse(line);
    ManifestRecord r;
    r.path = j.at("path").get<std::string>();
    r.room_id = j.at("room_id").get<std::string>();
    r.room_type = parse_room_type(j.at("room_type").get<std::string>());
    r.split = j.at("split").get<std::string>();
    r.snr_db = j.at("snr_db").get<double>();
    r.t60_s = j.at("t60_s").get<double>();
    r.speech_id = j.at("speech_id").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    return r;
  } catch (const nlohmann::json::exception &e) {
    fail(ErrorKind::kIo, std::string("bad manifest line: ") + e.what());
  }
}

inline std::vector<ManifestRecord> read_manifest(const std::filesystem::path &path) {
  std::istringstream is(read_file(path));
  std::vector<ManifestRecord> out;
  std::string line;
  while (std::getline(is, line))
    if (!line.empty()) out.push_back(parse_manifest_line(line));
  return out;
}

// ---------------------------------------------------------------------------
// Planning

struct RoomPlan {
  RoomSpec spec;
  double t60_reestimated = 0.0;  // estimate_t60 on the reshaped impulse
};

struct InstancePlan {
  std::size_t room = 0;  // index into CorpusPlan::rooms
  std::string split;
  int index_in_room = 0;
  std::string speech_id;
  std::uint64_t speech_seed = 0;
  std::uint64_t seed = 0;
  double duration_s = 0.0;
};

struct CorpusPlan {
  CorpusConfig config;
  std::vector<RoomPlan> rooms;
  std::vector<InstancePlan> instances;  // grouped by room, in room order
};

/// Draws every room's recipe (SNR, T60, impulse response, background ids)
/// and every instance's speech id from the config seed. Pure.
inline CorpusPlan plan_corpus(const CorpusConfig &config) {
  config.validate();
  CorpusPlan plan;
  plan.config = config;
  std::mt19937_64 rng(derive_seed(config.seed, 0x726f6f6d));

  auto add_room = [&](const std::string &room_id, RoomType type,
                      const std::vector<std::pair<std::string, int>> &splits,
                      double duration) {
    RoomPlan rp;
    RoomSpec &s = rp.spec;
    s.room_id = room_id;
    s.room_type = type;
    s.snr_db = std::uniform_real_distribution<double>(kMinSnrDb, kMaxSnrDb)(rng);
    double t60 = std::uniform_real_distribution<double>(kMinT60, kMaxT60)(rng);
    double base_t60 = std::uniform_real_distribution<double>(0.5, 0.9)(rng);
    std::uint64_t rir_seed = rng(), stat = rng(), nonstat = rng(), music = rng();
    AudioClip rir = synth_sources(SourceKind::kRir, rir_seed, 1.1 * base_t60,
                                  SourceOptions{base_t60});
    s.rir = reshape_rir(rir, t60);
    RoomComponents rc = components_for(type);
    if (rc.stationary)
      s.stationary_noise_id = SyntheticSourceBank::id(SourceKind::kStationaryNoise, stat);
    if (rc.nonstationary)
      s.nonstationary_noise_id =
          SyntheticSourceBank::id(SourceKind::kNonstationaryNoise, nonstat);
    if (rc.music) s.music_id = SyntheticSourceBank::id(SourceKind::kMusic, music);
    rp.t60_reestimated = estimate_t60(s.rir.impulse).seconds;

    const std::size_t room_index = plan.rooms.size();
    plan.rooms.push_back(std::move(rp));
    for (const auto &[split, count] : splits) {
      for (int k = 0; k < count; ++k) {
        InstancePlan ip;
        ip.room = room_index;
        ip.split = split;
        ip.index_in_room = k;
        ip.speech_seed = rng();
        ip.seed = rng();
        ip.speech_id = SyntheticSourceBank::id(SourceKind::kSpeech, ip.speech_seed);
        ip.duration_s = duration;
        plan.instances.push_back(std::move(ip));
      }
    }
  };

  auto room_name = [](const std::string &prefix, int i) {
    std::ostringstream os;
    os << prefix << '_' << std::setw(4) << std::setfill('0') << i;
    return os.str();
  };

  for (int r = 0; r < config.train_rooms; ++r)
    add_room(room_name("train", r), RoomType::kCompleteRoom,
             {{"train", config.instances_per_room}}, config.duration_s);
  for (int r = 0; r < config.val_rooms; ++r)
    add_room(room_name("val", r), RoomType::kCompleteRoom,
             {{"val", config.val_instances_per_room}}, config.duration_s);
  for (RoomType t : config.room_types)
    for (int r = 0; r < config.enroll_test_rooms_per_type; ++r)
      add_room(room_name(to_string(t), r), t,
               {{"enroll", config.enroll_instances_per_room},
                {"test", config.test_instances_per_room}},
               config.test_duration_s);
  return plan;
}

inline std::string instance_filename(const CorpusPlan &plan, const InstancePlan &ip) {
  std::ostringstream os;
  os << "wav/" << plan.rooms[ip.room].spec.room_id << '_' << ip.split << '_'
     << ip.index_in_room << ".wav";
  return os.str();
}

inline ManifestRecord manifest_record(const CorpusPlan &plan, const InstancePlan &ip) {
  const RoomSpec &s = plan.rooms[ip.room].spec;
  ManifestRecord r;
  r.path = instance_filename(plan, ip);
  r.room_id = s.room_id;
  r.room_type = s.room_type;
  r.split = ip.split;
  r.snr_db = s.snr_db;
  r.t60_s = s.rir.t60_target;
  r.speech_id = ip.speech_id;
  r.seed = ip.seed;
  return r;
}

struct CorpusItem {
  std::size_t index = 0;  // into CorpusPlan::instances
  ManifestRecord record;
  RoomInstance instance;
};

/// Realizes every planned instance and hands it to fn(CorpusItem&&). Rooms
/// are distributed over `workers` threads, so fn must be safe to call
/// concurrently for different items; items of one room arrive in order.
template <typename Fn>
void for_each_instance(const CorpusPlan &plan, int workers, Fn &&fn) {
  std::vector<std::size_t> room_begin(plan.rooms.size() + 1, plan.instances.size());
  for (std::size_t i = plan.instances.size(); i-- > 0;)
    room_begin[plan.instances[i].room] = i;
  for (std::size_t r = plan.rooms.size(); r-- > 0;)
    room_begin[r] = std::min(room_begin[r], room_begin[r + 1]);

  const SyntheticSourceBank bank(plan.config.background_duration_s, plan.config.duration_s);
  parallel_for(plan.rooms.size(), workers, [&](std::size_t r) {
    const RoomSpec &spec = plan.rooms[r].spec;
    if (room_begin[r] == room_begin[r + 1]) return;
    Background bg = build_background(spec, bank);
    for (std::size_t i = room_begin[r]; i < room_begin[r + 1]; ++i) {
      const InstancePlan &ip = plan.instances[i];
      AudioClip speech = synth_sources(SourceKind::kSpeech, ip.speech_seed, ip.duration_s);
      CorpusItem item;
      item.index = i;
      item.record = manifest_record(plan, ip);
      item.instance = realize_room_instance(spec, speech, bg, ip.seed, ip.speech_id);
      fn(std::move(item));
    }
  });
}

struct CorpusSummary {
  std::filesystem::path manifest;
  std::map<std::string, std::size_t> split_counts;
  std::size_t clamped_samples = 0;
  double max_snr_error_db = 0.0;    // |realized - labeled| over all instances
  double max_t60_rel_error = 0.0;   // |re-estimated - target| / target over all rooms
};

inline double max_t60_relative_error(const CorpusPlan &plan) {
  double worst = 0.0;
  for (const RoomPlan &rp : plan.rooms)
    worst = std::max(worst, std::abs(rp.t60_reestimated - rp.spec.rir.t60_target) /
                                rp.spec.rir.t60_target);
  return worst;
}

/// Writes WAV files under out_dir/wav/ and then, atomically, the manifest
/// out_dir/manifest.jsonl.
inline CorpusSummary generate_corpus(const CorpusConfig &config,
                                     const std::filesystem::path &out_dir, int workers = 1) {
  namespace fs = std::filesystem;
  CorpusPlan plan = plan_corpus(config);
  if (plan.instances.empty()) fail(ErrorKind::kInvalidArgument, "corpus config yields no instances");
  std::error_code ec;
  fs::create_directories(out_dir / "wav", ec);
  if (ec) fail(ErrorKind::kIo, "cannot create output directory: " + out_dir.string());

  CorpusSummary summary;
  std::vector<std::string> lines(plan.instances.size());
  std::mutex mu;
  for_each_instance(plan, workers, [&](CorpusItem &&item) {
    SaveResult sr = save_wav(item.instance.audio, out_dir / item.record.path);
    double err = std::abs(item.instance.realized_snr_db - item.record.snr_db);
    lines[item.index] = to_json_line(item.record);
    std::lock_guard<std::mutex> lock(mu);
    summary.clamped_samples += sr.clamped;
    summary.max_snr_error_db = std::max(summary.max_snr_error_db, err);
    ++summary.split_counts[item.record.split];
  });
  summary.max_t60_rel_error = max_t60_relative_error(plan);

  std::string body;
  for (const auto &l : lines) body += l + "\n";
  summary.manifest = out_dir / "manifest.jsonl";
  atomic_write(summary.manifest, body);
  return summary;
}

}  // namespace evec
