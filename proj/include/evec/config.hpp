// include/evec/config.hpp

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

// Pipeline configuration. One INI file with the sections
//   [corpus] [features] [ubm] [tmatrix] [lda] [plda] [metadata] [eval]
// all of which must be present (they may be empty). corpus.seed is
// mandatory; every other key has a default. Unknown keys are errors.

#pragma once

#include <cstdint>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "evec/augment.hpp"
#include "evec/bottleneck.hpp"
#include "evec/common.hpp"
#include "evec/corpus.hpp"
#include "evec/features.hpp"
#include "evec/gmm.hpp"
#include "evec/ivector.hpp"
#include "evec/ridge.hpp"
#include "evec/wada.hpp"

namespace evec {

inline constexpr std::array<const char *, 8> kConfigSections{
    "corpus", "features", "ubm", "tmatrix", "lda", "plda", "metadata", "eval"};

struct PipelineConfig {
  std::uint64_t seed = 0;
  CorpusConfig corpus;
  FeatureConfig features;
  bool cmvn = false;
  UbmOptions ubm;
  TMatrixOptions tmatrix;
  std::vector<int> j_list{5, 10, 20};
  bool length_norm = false;
  std::vector<double> lambda_grid = default_lambda_grid();
  BottleneckHyper bottleneck;
  std::size_t wada_samples_per_point = 200000;
  double wada_step_db = 1.0;
  std::vector<RoomType> room_types{kAllRoomTypes.begin(), kAllRoomTypes.end()};
  std::vector<AugmentVariant> variants{kAllAugmentVariants.begin(), kAllAugmentVariants.end()};
  int augment_j = 20;
  bool constant_control = true;

  /// Applies `s` as the run seed and re-derives the per-stage seeds.
  void set_seed(std::uint64_t s) {
    seed = s;
    corpus.seed = derive_seed(s, 1);
    ubm.seed = derive_seed(s, 2);
    tmatrix.seed = derive_seed(s, 3);
    bottleneck.seed = derive_seed(s, 4);
  }

  int max_j() const { return *std::max_element(j_list.begin(), j_list.end()); }

  void validate() const {
    corpus.validate();
    require(!j_list.empty(), "config: lda.j_list is empty");
    for (int j : j_list) require(j >= 1, "config: lda.j_list entries must be positive");
    require(std::find(j_list.begin(), j_list.end(), augment_j) != j_list.end(),
            "config: eval.augment_j must be one of lda.j_list");
    require(max_j() <= tmatrix.ivector_dim && max_j() < corpus.train_rooms,
            "config: j exceeds min(ivector_dim, train_rooms - 1)");
    require(corpus.val_rooms >= 1 && corpus.val_instances_per_room >= 1,
            "config: metadata estimators need a validation split");
    require(!lambda_grid.empty(), "config: metadata.lambda_grid is empty");
    for (double l : lambda_grid) require(l >= 0.0, "config: lambda values must be non-negative");
    require(wada_step_db > 0.0 && wada_step_db <= 1.0, "config: metadata.wada_step_db must be in (0, 1]");
    require(wada_samples_per_point >= 1000, "config: metadata.wada_samples_per_point must be at least 1000");
    require(!room_types.empty(), "config: eval.room_types is empty");
    for (RoomType t : room_types)
      require(std::find(corpus.room_types.begin(), corpus.room_types.end(), t) != corpus.room_types.end(),
              "config: eval room type not generated by the corpus: " + to_string(t));
  }
};

namespace detail {

template <typename T>
std::string join(const std::vector<T> &v) {
  std::ostringstream os;
  os.precision(17);
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
  return os.str();
}

inline std::vector<std::string> split_list(const std::string &s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(s);
  while (std::getline(is, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <typename T>
T parse_value(const std::string &key, const std::string &text) {
  std::istringstream is(text);
  T v;
  if constexpr (std::is_same_v<T, bool>) {
    if (text == "true" || text == "1") return true;
    if (text == "false" || text == "0") return false;
    fail(ErrorKind::kInvalidArgument, "config: " + key + " is not a boolean: " + text);
  } else {
    if (!(is >> v) || !(is >> std::ws).eof())
      fail(ErrorKind::kInvalidArgument, "config: bad value for " + key + ": " + text);
  }
  return v;
}

// Tracks which keys were consumed so leftovers can be reported.
class ConfigReader {
 public:
  ConfigReader(const boost::property_tree::ptree &pt, std::set<std::string> headers)
      : pt_(pt), headers_(std::move(headers)) {}

  template <typename T>
  void get(const std::string &section, const std::string &key, T &out) {
    const std::string path = section + "." + key;
    used_.insert(path);
    if (auto v = pt_.get_optional<std::string>(boost::property_tree::ptree::path_type(path, '.')))
      out = parse_value<T>(path, *v);
  }

  template <typename T, typename Parse>
  void get_list(const std::string &section, const std::string &key, std::vector<T> &out, Parse parse) {
    const std::string path = section + "." + key;
    used_.insert(path);
    if (auto v = pt_.get_optional<std::string>(boost::property_tree::ptree::path_type(path, '.'))) {
      out.clear();
      for (const std::string &item : split_list(*v)) out.push_back(parse(path, item));
    }
  }

  void check_sections() const {
    for (const char *s : kConfigSections)
      if (!headers_.count(s))
        fail(ErrorKind::kInvalidArgument, std::string("config: missing section [") + s + "]");
  }

  void check_keys() const {
    for (const auto &[section, body] : pt_) {
      if (std::find_if(kConfigSections.begin(), kConfigSections.end(),
                       [&](const char *s) { return section == s; }) == kConfigSections.end())
        fail(ErrorKind::kInvalidArgument, "config: unknown section [" + section + "]");
      for (const auto &kv : body)
        if (!used_.count(section + "." + kv.first))
          fail(ErrorKind::kInvalidArgument, "config: unknown key " + section + "." + kv.first);
    }
  }

 private:
  const boost::property_tree::ptree &pt_;
  std::set<std::string> used_;
  std::set<std::string> headers_;  // every [section] line, empty ones included
};

}  // namespace detail

inline PipelineConfig parse_config(const std::string &ini_text) {
  boost::property_tree::ptree pt;
  try {
    std::istringstream is(ini_text);
    boost::property_tree::ini_parser::read_ini(is, pt);
  } catch (const boost::property_tree::ini_parser_error &e) {
    fail(ErrorKind::kInvalidArgument, std::string("config: ") + e.what());
  }
  // the INI reader drops sections without keys, so headers are collected here
  std::set<std::string> headers;
  {
    std::istringstream is(ini_text);
    std::string line;
    while (std::getline(is, line)) {
      line.erase(0, line.find_first_not_of(" \t"));
      line.erase(line.find_last_not_of(" \t\r") + 1);
      if (line.size() > 2 && line.front() == '[' && line.back() == ']') headers.insert(line.substr(1, line.size() - 2));
    }
  }
  PipelineConfig c;
  detail::ConfigReader r(pt, std::move(headers));
  r.check_sections();
  if (!pt.get_optional<std::string>("corpus.seed"))
    fail(ErrorKind::kInvalidArgument, "config: corpus.seed is mandatory");
  std::uint64_t seed = 0;
  r.get("corpus", "seed", seed);
  c.set_seed(seed);

  auto room_type = [](const std::string &, const std::string &s) { return parse_room_type(s); };
  CorpusConfig &k = c.corpus;
  r.get("corpus", "train_rooms", k.train_rooms);
  r.get("corpus", "instances_per_room", k.instances_per_room);
  r.get("corpus", "val_rooms", k.val_rooms);
  r.get("corpus", "val_instances_per_room", k.val_instances_per_room);
  r.get("corpus", "enroll_test_rooms_per_type", k.enroll_test_rooms_per_type);
  r.get("corpus", "enroll_instances_per_room", k.enroll_instances_per_room);
  r.get("corpus", "test_instances_per_room", k.test_instances_per_room);
  r.get("corpus", "duration_s", k.duration_s);
  r.get("corpus", "test_duration_s", k.test_duration_s);
  r.get("corpus", "background_duration_s", k.background_duration_s);
  r.get_list("corpus", "room_types", k.room_types, room_type);

  FeatureConfig &f = c.features;
  r.get("features", "frame_length", f.frame_length);
  r.get("features", "frame_shift", f.frame_shift);
  r.get("features", "fft_size", f.fft_size);
  r.get("features", "num_mel", f.num_mel);
  r.get("features", "num_ceps", f.num_ceps);
  r.get("features", "preemphasis", f.preemphasis);
  r.get("features", "high_hz", f.high_hz);
  r.get("features", "cmvn", c.cmvn);

  r.get("ubm", "num_components", c.ubm.num_components);
  r.get("ubm", "iterations", c.ubm.iterations);
  r.get("ubm", "init_subsample", c.ubm.init_subsample);
  r.get("ubm", "variance_floor_ratio", c.ubm.variance_floor_ratio);

  r.get("tmatrix", "ivector_dim", c.tmatrix.ivector_dim);
  r.get("tmatrix", "iterations", c.tmatrix.iterations);
  r.get("tmatrix", "init_scale", c.tmatrix.init_scale);

  r.get_list("lda", "j_list", c.j_list, [](const std::string &key, const std::string &s) {
    return detail::parse_value<int>(key, s);
  });
  r.get("lda", "length_norm", c.length_norm);

  r.get_list("metadata", "lambda_grid", c.lambda_grid, [](const std::string &key, const std::string &s) {
    return detail::parse_value<double>(key, s);
  });
  r.get("metadata", "bn_max_epochs", c.bottleneck.max_epochs);
  r.get("metadata", "bn_batch", c.bottleneck.batch);
  r.get("metadata", "bn_step_size", c.bottleneck.step_size);
  r.get("metadata", "bn_patience", c.bottleneck.patience);
  r.get("metadata", "wada_samples_per_point", c.wada_samples_per_point);
  r.get("metadata", "wada_step_db", c.wada_step_db);

  r.get_list("eval", "room_types", c.room_types, room_type);
  r.get_list("eval", "variants", c.variants, [](const std::string &, const std::string &s) {
    return parse_augment_variant(s);
  });
  r.get("eval", "augment_j", c.augment_j);
  r.get("eval", "constant_control", c.constant_control);
  r.check_keys();
  c.validate();
  return c;
}

inline PipelineConfig load_config(const std::filesystem::path &path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const Error &) {
    fail(ErrorKind::kInvalidArgument, "config: cannot read " + path.string());
  }
  return parse_config(text);
}

/// Every effective value, defaults included, in INI form. Feeding the echo
/// back through parse_config reproduces the same config.
inline std::string config_echo(const PipelineConfig &c) {
  auto types = [](const std::vector<RoomType> &v) {
    std::vector<std::string> s;
    for (RoomType t : v) s.push_back(to_string(t));
    return detail::join(s);
  };
  std::vector<std::string> variants;
  for (AugmentVariant v : c.variants) variants.push_back(to_string(v));
  std::ostringstream os;
  os.precision(17);
  const CorpusConfig &k = c.corpus;
  os << "[corpus]\nseed = " << c.seed << "\ntrain_rooms = " << k.train_rooms
     << "\ninstances_per_room = " << k.instances_per_room << "\nval_rooms = " << k.val_rooms
     << "\nval_instances_per_room = " << k.val_instances_per_room
     << "\nenroll_test_rooms_per_type = " << k.enroll_test_rooms_per_type
     << "\nenroll_instances_per_room = " << k.enroll_instances_per_room
     << "\ntest_instances_per_room = " << k.test_instances_per_room << "\nduration_s = " << k.duration_s
     << "\ntest_duration_s = " << k.test_duration_s << "\nbackground_duration_s = " << k.background_duration_s
     << "\nroom_types = " << types(k.room_types) << "\n\n";
  const FeatureConfig &f = c.features;
  os << "[features]\nframe_length = " << f.frame_length << "\nframe_shift = " << f.frame_shift
     << "\nfft_size = " << f.fft_size << "\nnum_mel = " << f.num_mel << "\nnum_ceps = " << f.num_ceps
     << "\npreemphasis = " << f.preemphasis << "\nhigh_hz = " << f.high_hz
     << "\ncmvn = " << (c.cmvn ? "true" : "false") << "\n\n";
  os << "[ubm]\nnum_components = " << c.ubm.num_components << "\niterations = " << c.ubm.iterations
     << "\ninit_subsample = " << c.ubm.init_subsample << "\nvariance_floor_ratio = " << c.ubm.variance_floor_ratio
     << "\n\n";
  os << "[tmatrix]\nivector_dim = " << c.tmatrix.ivector_dim << "\niterations = " << c.tmatrix.iterations
     << "\ninit_scale = " << c.tmatrix.init_scale << "\n\n";
  os << "[lda]\nj_list = " << detail::join(c.j_list) << "\nlength_norm = " << (c.length_norm ? "true" : "false")
     << "\n\n[plda]\n\n";
  os << "[metadata]\nlambda_grid = " << detail::join(c.lambda_grid) << "\nbn_max_epochs = " << c.bottleneck.max_epochs
     << "\nbn_batch = " << c.bottleneck.batch << "\nbn_step_size = " << c.bottleneck.step_size
     << "\nbn_patience = " << c.bottleneck.patience << "\nwada_samples_per_point = " << c.wada_samples_per_point
     << "\nwada_step_db = " << c.wada_step_db << "\n\n";
  os << "[eval]\nroom_types = " << types(c.room_types) << "\nvariants = " << detail::join(variants)
     << "\naugment_j = " << c.augment_j << "\nconstant_control = " << (c.constant_control ? "true" : "false")
     << "\n";
  return os.str();
}

/// FNV-1a over the effective-config echo, as 16 hex digits.
inline std::string config_digest(const PipelineConfig &c) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : config_echo(c)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace evec
