// evec/report.hpp

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

// Report files for one or more evaluation runs (one EvalReport per seed):
//
//   verification.csv   room_type,j,variant,seed,eer,trials   (variant none)
//   augmentation.csv   same columns, j = augment_j, every variant
//   metadata.csv       room_type,j,target,estimator,seed,mae
//   summary.json       seed-averaged values plus per-seed digests
//   plots/eer_<type>.dat, plots/<target>_mae_<type>.dat
//                      whitespace-separated series, first column j
//
// Numbers are printed with %.6f so reruns compare byte for byte.

#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "evec/pipeline.hpp"

namespace evec {

namespace detail {

inline std::string fixed(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

inline std::string verification_csv(const std::vector<EvalReport> &reps, bool augmentation) {
  std::string out = "room_type,j,variant,seed,eer,trials\n";
  for (const EvalReport &rep : reps)
    for (const VerificationRow &r : augmentation ? rep.augmentation : rep.verification)
      out += to_string(r.room_type) + "," + std::to_string(r.j) + "," + r.variant + "," +
             std::to_string(rep.seed) + "," + fixed(r.eer) + "," + std::to_string(r.trials) + "\n";
  return out;
}

inline std::string metadata_csv(const std::vector<EvalReport> &reps) {
  std::string out = "room_type,j,target,estimator,seed,mae\n";
  for (const EvalReport &rep : reps)
    for (const MetadataRow &r : rep.metadata)
      out += to_string(r.room_type) + "," + std::to_string(r.j) + "," + to_string(r.target) + "," +
             r.estimator + "," + std::to_string(rep.seed) + "," + fixed(r.mae) + "\n";
  return out;
}

}  // namespace detail

/// Seed-averaged views of a set of reports. Keys that are absent from some
/// report average over the reports that have them.
class ReportSummary {
 public:
  explicit ReportSummary(const std::vector<EvalReport> &reps) {
    if (reps.empty()) fail(ErrorKind::kInvalidArgument, "report summary: no reports");
    for (const EvalReport &rep : reps) {
      for (const VerificationRow &r : rep.verification) eer_[{to_string(r.room_type), r.j, r.variant}].push_back(r.eer);
      for (const VerificationRow &r : rep.augmentation) aug_[{to_string(r.room_type), r.j, r.variant}].push_back(r.eer);
      for (const MetadataRow &r : rep.metadata)
        mae_[{to_string(r.room_type), r.j, to_string(r.target) + "/" + r.estimator}].push_back(r.mae);
    }
  }

  double eer(RoomType t, int j) const { return mean(eer_, {to_string(t), j, "none"}); }
  double augmented_eer(RoomType t, int j, const std::string &variant) const {
    return mean(aug_, {to_string(t), j, variant});
  }
  /// Per-seed values, in report order.
  const std::vector<double> &augmented_eer_seeds(RoomType t, int j, const std::string &variant) const {
    return at(aug_, {to_string(t), j, variant});
  }
  double mae(RoomType t, int j, TargetKind target, const std::string &estimator) const {
    return mean(mae_, {to_string(t), j, to_string(target) + "/" + estimator});
  }

 private:
  using Key = std::tuple<std::string, int, std::string>;
  using Table = std::map<Key, std::vector<double>>;

  static const std::vector<double> &at(const Table &t, const Key &k) {
    auto it = t.find(k);
    if (it == t.end())
      fail(ErrorKind::kMissingArtifact, "report has no entry for " + std::get<0>(k) + " j=" +
                                            std::to_string(std::get<1>(k)) + " " + std::get<2>(k));
    return it->second;
  }
  static double mean(const Table &t, const Key &k) {
    const std::vector<double> &v = at(t, k);
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  }

  Table eer_, aug_, mae_;
};

inline nlohmann::ordered_json summary_json(const std::vector<EvalReport> &reps, const PipelineConfig &cfg) {
  ReportSummary s(reps);
  nlohmann::ordered_json j;
  j["seeds"] = nlohmann::json::array();
  j["config_digests"] = nlohmann::json::array();
  for (const EvalReport &r : reps) {
    j["seeds"].push_back(r.seed);
    j["config_digests"].push_back(r.config_digest);
  }
  auto num = [](double v) { return std::stod(detail::fixed(v)); };
  for (RoomType t : cfg.room_types) {
    nlohmann::ordered_json rt;
    for (int jj : cfg.j_list) {
      nlohmann::ordered_json e;
      e["eer"] = num(s.eer(t, jj));
      for (TargetKind k : {TargetKind::kSnrDb, TargetKind::kT60S})
        for (const char *est : {"bn", "ridge", "wada", "mean"}) {
          if (k == TargetKind::kT60S && std::string(est) == "wada") continue;
          e[to_string(k) + "_mae"][est] = num(s.mae(t, jj, k, est));
        }
      rt["j" + std::to_string(jj)] = e;
    }
    nlohmann::ordered_json aug;
    for (const VerificationRow &r : reps.front().augmentation)
      if (r.room_type == t) aug[r.variant] = num(s.augmented_eer(t, r.j, r.variant));
    rt["augmentation_eer"] = aug;
    j["room_types"][to_string(t)] = rt;
  }
  return j;
}

/// Plot-data series: EER against j per room type, and MAE against j per
/// room type and target with one column per estimator.
inline std::map<std::string, std::string> plot_series(const std::vector<EvalReport> &reps,
                                                      const PipelineConfig &cfg) {
  ReportSummary s(reps);
  std::map<std::string, std::string> files;
  for (RoomType t : cfg.room_types) {
    std::string eer = "# j eer_percent\n";
    for (int j : cfg.j_list) eer += std::to_string(j) + " " + detail::fixed(s.eer(t, j)) + "\n";
    files["eer_" + to_string(t) + ".dat"] = eer;
    for (TargetKind k : {TargetKind::kSnrDb, TargetKind::kT60S}) {
      const bool snr = k == TargetKind::kSnrDb;
      std::string d = snr ? "# j bn ridge wada mean\n" : "# j bn ridge mean\n";
      for (int j : cfg.j_list) {
        d += std::to_string(j) + " " + detail::fixed(s.mae(t, j, k, "bn")) + " " +
             detail::fixed(s.mae(t, j, k, "ridge"));
        if (snr) d += " " + detail::fixed(s.mae(t, j, k, "wada"));
        d += " " + detail::fixed(s.mae(t, j, k, "mean")) + "\n";
      }
      files[to_string(k) + "_mae_" + to_string(t) + ".dat"] = d;
    }
  }
  return files;
}

/// Headline table: EER at every j, SNR and T60 MAE of each estimator at
/// the largest j, and augmented EER.
inline std::string headline_table(const std::vector<EvalReport> &reps, const PipelineConfig &cfg) {
  ReportSummary s(reps);
  const int jm = cfg.max_j();
  std::ostringstream os;
  char buf[256];
  os << "seeds:";
  for (const EvalReport &r : reps) os << " " << r.seed;
  os << "\n\nRoom verification EER (%)\n";
  std::snprintf(buf, sizeof(buf), "%-18s", "room_type");
  os << buf;
  for (int j : cfg.j_list) {
    std::snprintf(buf, sizeof(buf), " %8s", ("j=" + std::to_string(j)).c_str());
    os << buf;
  }
  os << "\n";
  for (RoomType t : cfg.room_types) {
    std::snprintf(buf, sizeof(buf), "%-18s", to_string(t).c_str());
    os << buf;
    for (int j : cfg.j_list) {
      std::snprintf(buf, sizeof(buf), " %8.2f", s.eer(t, j));
      os << buf;
    }
    os << "\n";
  }
  os << "\nMetadata MAE at j=" << jm << " (SNR dB | T60 s)\n";
  std::snprintf(buf, sizeof(buf), "%-18s %7s %7s %7s %7s | %7s %7s %7s\n", "room_type", "bn", "ridge", "wada",
                "mean", "bn", "ridge", "mean");
  os << buf;
  for (RoomType t : cfg.room_types) {
    auto snr = [&](const char *e) { return s.mae(t, jm, TargetKind::kSnrDb, e); };
    auto t60 = [&](const char *e) { return s.mae(t, jm, TargetKind::kT60S, e); };
    std::snprintf(buf, sizeof(buf), "%-18s %7.2f %7.2f %7.2f %7.2f | %7.3f %7.3f %7.3f\n", to_string(t).c_str(),
                  snr("bn"), snr("ridge"), snr("wada"), snr("mean"), t60("bn"), t60("ridge"), t60("mean"));
    os << buf;
  }
  std::vector<std::string> variants;
  for (const VerificationRow &r : reps.front().augmentation)
    if (std::find(variants.begin(), variants.end(), r.variant) == variants.end()) variants.push_back(r.variant);
  if (!variants.empty()) {
    os << "\nAugmented EER (%) at j=" << cfg.augment_j << "\n";
    std::snprintf(buf, sizeof(buf), "%-18s", "room_type");
    os << buf;
    for (const std::string &v : variants) {
      std::snprintf(buf, sizeof(buf), " %9s", v.c_str());
      os << buf;
    }
    os << "\n";
    for (RoomType t : cfg.room_types) {
      std::snprintf(buf, sizeof(buf), "%-18s", to_string(t).c_str());
      os << buf;
      for (const std::string &v : variants) {
        std::snprintf(buf, sizeof(buf), " %9.2f", s.augmented_eer(t, cfg.augment_j, v));
        os << buf;
      }
      os << "\n";
    }
  }
  return os.str();
}

/// Writes every report file under `dir` and returns the paths written.
inline std::vector<std::filesystem::path> write_reports(const std::filesystem::path &dir,
                                                        const std::vector<EvalReport> &reps,
                                                        const PipelineConfig &cfg) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir / "plots", ec);
  if (ec) fail(ErrorKind::kIo, "cannot create report directory: " + dir.string());
  std::vector<fs::path> written;
  auto put = [&](const fs::path &p, const std::string &bytes) {
    atomic_write(p, bytes);
    written.push_back(p);
  };
  put(dir / "verification.csv", detail::verification_csv(reps, false));
  put(dir / "augmentation.csv", detail::verification_csv(reps, true));
  put(dir / "metadata.csv", detail::metadata_csv(reps));
  put(dir / "summary.json", summary_json(reps, cfg).dump(2) + "\n");
  put(dir / "config.ini", config_echo(cfg));
  for (const auto &[name, text] : plot_series(reps, cfg)) put(dir / "plots" / name, text);
  return written;
}

}  // namespace evec
