// evec/artifacts.hpp

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

// Model directory layout and stage-wise training.
//
//   ubm.bin                      <- ubm
//   tmatrix.bin                  <- tmatrix     (needs ubm)
//   lda.bin                      <- lda         (needs tmatrix), largest j
//   plda_j<j>.bin                <- plda        (needs lda)
//   ridge_<target>_j<j>.bin      <- ridge       (needs lda)
//   bn_<target>_j<j>.bin         <- bottleneck  (needs lda)
//   wada.txt                     <- wada
//   <stage>.log                  training trace of each stage
//
// Every file goes through atomic_write. A `.lock` file keeps two commands
// from working on one directory at the same time.

#pragma once

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "evec/pipeline.hpp"

namespace evec {

inline const std::vector<std::string> &stage_names() {
  static const std::vector<std::string> names{"ubm", "tmatrix", "lda", "plda", "ridge", "bottleneck", "wada"};
  return names;
}

/// Exclusive lock on a directory for the lifetime of the object. A lock
/// left behind by a killed process has to be removed by hand.
class DirectoryLock {
 public:
  explicit DirectoryLock(const std::filesystem::path &dir) : path_(dir / ".lock") {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) fail(ErrorKind::kIo, "cannot create directory: " + dir.string());
    std::FILE *f = std::fopen(path_.c_str(), "wx");
    if (!f) {
      if (std::filesystem::exists(path_))
        fail(ErrorKind::kIo, "directory is locked by another command: " + path_.string());
      fail(ErrorKind::kIo, "cannot create lock file: " + path_.string());
    }
    std::fclose(f);
  }
  ~DirectoryLock() {
    std::error_code ec;
    std::filesystem::remove(path_, ec);
  }
  DirectoryLock(const DirectoryLock &) = delete;
  DirectoryLock &operator=(const DirectoryLock &) = delete;

 private:
  std::filesystem::path path_;
};

namespace detail {

inline std::string per_j(const std::string &prefix, int j) { return prefix + "_j" + std::to_string(j) + ".bin"; }

inline std::string target_file(const std::string &kind, TargetKind t, int j) {
  return per_j(kind + "_" + to_string(t), j);
}

/// Stage that writes `file`, for error messages.
inline std::filesystem::path need(const std::filesystem::path &dir, const std::string &file,
                                  const std::string &stage) {
  std::filesystem::path p = dir / file;
  if (!std::filesystem::exists(p))
    fail(ErrorKind::kMissingArtifact, "missing artifact " + p.string() + "; run 'train " + stage + "' first");
  return p;
}

inline std::string trace_text(const std::vector<double> &v, const std::string &header) {
  std::string out = "# " + header + "\n";
  char buf[64];
  for (std::size_t i = 0; i < v.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%zu %.17g\n", i, v[i]);
    out += buf;
  }
  return out;
}

}  // namespace detail

inline GmmModel load_ubm(const std::filesystem::path &dir) {
  return decode_gmm(read_file(detail::need(dir, "ubm.bin", "ubm")));
}
inline TMatrixModel load_tmatrix(const std::filesystem::path &dir) {
  return decode_tmatrix(read_file(detail::need(dir, "tmatrix.bin", "tmatrix")));
}
inline LdaModel load_lda(const std::filesystem::path &dir) {
  return decode_lda(read_file(detail::need(dir, "lda.bin", "lda")));
}
inline WadaTable load_wada(const std::filesystem::path &dir) {
  return decode_wada_table(read_file(detail::need(dir, "wada.txt", "wada")));
}

/// Every model eval needs; names the first missing stage.
inline ModelSet load_models(const std::filesystem::path &dir, const PipelineConfig &cfg) {
  ModelSet m;
  m.ubm = load_ubm(dir);
  m.tmatrix = load_tmatrix(dir);
  m.lda = load_lda(dir);
  if (m.lda.dim() < cfg.max_j())
    fail(ErrorKind::kMissingArtifact, "lda.bin has fewer than " + std::to_string(cfg.max_j()) +
                                          " directions; rerun 'train lda'");
  for (int j : cfg.j_list)
    m.plda[j] = decode_plda(read_file(detail::need(dir, detail::per_j("plda", j), "plda")));
  for (int j : cfg.j_list) {
    Estimators &e = m.estimators[j];
    e.ridge_snr = decode_ridge(read_file(detail::need(dir, detail::target_file("ridge", TargetKind::kSnrDb, j), "ridge")));
    e.ridge_t60 = decode_ridge(read_file(detail::need(dir, detail::target_file("ridge", TargetKind::kT60S, j), "ridge")));
    e.bn_snr = decode_bottleneck(
        read_file(detail::need(dir, detail::target_file("bn", TargetKind::kSnrDb, j), "bottleneck")));
    e.bn_t60 = decode_bottleneck(
        read_file(detail::need(dir, detail::target_file("bn", TargetKind::kT60S, j), "bottleneck")));
  }
  m.wada = load_wada(dir);
  return m;
}

/// Trains one stage from the utterances and writes its models and log into
/// `dir`. Upstream artifacts are read from `dir`; a missing one is a
/// kMissingArtifact error naming its stage. Returns the files written.
inline std::vector<std::filesystem::path> train_stage(const std::string &stage, const std::vector<Utterance> &utts,
                                                      const PipelineConfig &cfg, const std::filesystem::path &dir,
                                                      int workers) {
  namespace fs = std::filesystem;
  check_split_disjoint(utts);
  std::vector<fs::path> out;
  auto put = [&](const std::string &file, const std::string &bytes) {
    atomic_write(dir / file, bytes);
    out.push_back(dir / file);
  };
  auto ivectors = [&] { return extract_all_ivectors(utts, load_tmatrix(dir), cfg.length_norm, workers); };

  if (stage == "ubm") {
    std::vector<double> trace;
    GmmModel ubm = train_ubm_stage(utts, cfg, &trace);
    put("ubm.bin", encode_gmm(ubm));
    put("ubm.log", detail::trace_text(trace, "iteration total_loglik"));
  } else if (stage == "tmatrix") {
    GmmModel ubm = load_ubm(dir);
    std::vector<double> trace;
    TMatrixModel tm = train_tmatrix_stage(utts, ubm, cfg, workers, &trace);
    put("tmatrix.bin", encode_tmatrix(tm));
    put("tmatrix.log", detail::trace_text(trace, "iteration objective"));
  } else if (stage == "lda") {
    Eigen::MatrixXd iv = ivectors();
    LdaModel lda = train_lda_stage(utts, iv, cfg.max_j());
    std::vector<std::size_t> train = select_split(utts, "train");
    Eigen::VectorXd res = lda_residuals(compute_scatter(gather_rows(iv, train), room_labels(utts, train)), lda);
    put("lda.bin", encode_lda(lda));
    put("lda.log", detail::trace_text(std::vector<double>(res.data(), res.data() + res.size()),
                                      "direction relative_residual"));
  } else if (stage == "plda" || stage == "ridge" || stage == "bottleneck") {
    LdaModel lda = load_lda(dir);
    Eigen::MatrixXd iv = ivectors();
    std::string log;
    for (int j : cfg.j_list) {
      if (lda.dim() < j) fail(ErrorKind::kMissingArtifact, "lda.bin lacks j = " + std::to_string(j) + "; rerun 'train lda'");
      Eigen::MatrixXd e = evectors_at(iv, lda, j);
      if (stage == "plda") {
        put(detail::per_j("plda", j), encode_plda(train_plda_stage(utts, e)));
        log += "j " + std::to_string(j) + " trained\n";
      } else if (stage == "ridge") {
        for (TargetKind t : {TargetKind::kSnrDb, TargetKind::kT60S}) {
          RidgeModel m = train_ridge_stage(utts, e, t, cfg);
          put(detail::target_file("ridge", t, j), encode_ridge(m));
          char buf[96];
          std::snprintf(buf, sizeof(buf), "j %d %s lambda %.17g\n", j, to_string(t).c_str(), m.lambda);
          log += buf;
        }
      } else {
        for (TargetKind t : {TargetKind::kSnrDb, TargetKind::kT60S}) {
          std::vector<double> trace;
          BottleneckNet n = train_bottleneck_stage(utts, e, t, cfg, &trace);
          put(detail::target_file("bn", t, j), encode_bottleneck(n));
          log += detail::trace_text(trace, "j " + std::to_string(j) + " " + to_string(t) + " epoch val_mae");
        }
      }
    }
    put(stage + ".log", log);
  } else if (stage == "wada") {
    WadaTable t = train_wada_stage(cfg, workers);
    put("wada.txt", encode_wada_table(t));
    put("wada.log", "# points " + std::to_string(t.size()) + "\n");
  } else {
    fail(ErrorKind::kInvalidArgument, "unknown training stage: " + stage);
  }
  return out;
}

}  // namespace evec
