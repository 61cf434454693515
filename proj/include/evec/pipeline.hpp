// include/evec/pipeline.hpp

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

// Experiment stages shared by the CLI and the acceptance runner: utterance
// front end, model training, room verification, metadata estimation and the
// augmentation experiment.
//
// Splits: UBM, T-matrix, LDA, PLDA and both metadata estimators are trained
// on `train`; `val` selects lambda and stops the network; `enroll` and
// `test` are only scored. Ground truth is read through training_targets(),
// which refuses anything outside train/val.

#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "evec/augment.hpp"
#include "evec/bottleneck.hpp"
#include "evec/config.hpp"
#include "evec/corpus.hpp"
#include "evec/features.hpp"
#include "evec/gmm.hpp"
#include "evec/ivector.hpp"
#include "evec/lda.hpp"
#include "evec/metrics.hpp"
#include "evec/plda.hpp"
#include "evec/ridge.hpp"
#include "evec/wada.hpp"

namespace evec {

// ----------------------------------------------------------- front end

/// What the pipeline keeps of one recording: features and the WADA
/// statistic. The audio itself is dropped.
struct Utterance {
  ManifestRecord record;
  FeatureMatrix features;
  double wada_g = 0.0;
};

inline Utterance make_utterance(const AudioClip &audio, ManifestRecord record, const PipelineConfig &cfg) {
  Utterance u;
  u.record = std::move(record);
  FeatureMatrix fm = extract_mfcc(audio, cfg.features);
  u.features = cfg.cmvn ? cmvn(fm) : std::move(fm);
  u.wada_g = wada_statistic(audio.samples);
  return u;
}

struct SynthesisCheck {
  double max_snr_error_db = 0.0;
  double max_t60_rel_error = 0.0;
  std::size_t clamped_samples = 0;
};

/// Synthesizes the configured corpus in memory and runs the front end on
/// every instance.
inline std::vector<Utterance> synthesize_utterances(const PipelineConfig &cfg, int workers,
                                                    SynthesisCheck *check = nullptr) {
  CorpusPlan plan = plan_corpus(cfg.corpus);
  std::vector<Utterance> out(plan.instances.size());
  std::vector<double> snr_err(plan.instances.size(), 0.0);
  for_each_instance(plan, workers, [&](CorpusItem &&item) {
    snr_err[item.index] = std::abs(item.instance.realized_snr_db - item.record.snr_db);
    out[item.index] = make_utterance(item.instance.audio, item.record, cfg);
  });
  if (check) {
    check->max_snr_error_db = *std::max_element(snr_err.begin(), snr_err.end());
    check->max_t60_rel_error = max_t60_relative_error(plan);
  }
  return out;
}

/// Front end over the WAV files listed in a manifest.
inline std::vector<Utterance> load_utterances(const std::filesystem::path &manifest, const PipelineConfig &cfg,
                                              int workers) {
  std::vector<ManifestRecord> records = read_manifest(manifest);
  if (records.empty()) fail(ErrorKind::kInvalidArgument, "manifest is empty: " + manifest.string());
  const std::filesystem::path dir = manifest.parent_path();
  std::vector<Utterance> out(records.size());
  parallel_for(records.size(), workers, [&](std::size_t i) {
    out[i] = make_utterance(load_wav(dir / records[i].path), records[i], cfg);
  });
  return out;
}

inline std::vector<std::size_t> select_split(const std::vector<Utterance> &utts, const std::string &split,
                                             std::optional<RoomType> type = std::nullopt) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < utts.size(); ++i)
    if (utts[i].record.split == split && (!type || utts[i].record.room_type == *type)) idx.push_back(i);
  return idx;
}

inline std::vector<std::size_t> require_split(const std::vector<Utterance> &utts, const std::string &split) {
  std::vector<std::size_t> idx = select_split(utts, split);
  if (idx.empty()) fail(ErrorKind::kMissingArtifact, "manifest has no '" + split + "' split");
  return idx;
}

inline Eigen::MatrixXd gather_rows(const Eigen::MatrixXd &m, const std::vector<std::size_t> &idx) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(idx.size()), m.cols());
  for (std::size_t k = 0; k < idx.size(); ++k) out.row(static_cast<Eigen::Index>(k)) = m.row(static_cast<Eigen::Index>(idx[k]));
  return out;
}

inline std::vector<int> room_labels(const std::vector<Utterance> &utts, const std::vector<std::size_t> &idx) {
  std::vector<std::string> names;
  for (std::size_t i : idx) names.push_back(utts[i].record.room_id);
  return index_labels(names);
}

/// Rooms used for training must not reappear in enroll/test; a shared room
/// id means the test conditions were seen in training.
inline void check_split_disjoint(const std::vector<Utterance> &utts) {
  std::map<std::string, std::string> seen;  // room id -> first split family
  for (const Utterance &u : utts) {
    const std::string fam = u.record.split == "train" || u.record.split == "val" ? "train" : "test";
    auto [it, inserted] = seen.emplace(u.record.room_id, fam);
    if (!inserted && it->second != fam)
      fail(ErrorKind::kLeakage, "leakage: room '" + u.record.room_id + "' appears in both training and test splits");
  }
}

/// Ground-truth metadata for estimator training. Anything outside the
/// train and val splits is a leakage error.
inline Eigen::VectorXd training_targets(const std::vector<Utterance> &utts, const std::vector<std::size_t> &idx,
                                        TargetKind target) {
  Eigen::VectorXd y(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const ManifestRecord &r = utts[idx[k]].record;
    if (r.split != "train" && r.split != "val")
      fail(ErrorKind::kLeakage, "leakage guard: ground truth of a '" + r.split + "' record (" + r.room_id +
                                    ") requested for training");
    y(static_cast<Eigen::Index>(k)) = target == TargetKind::kSnrDb ? r.snr_db : r.t60_s;
  }
  return y;
}

// ------------------------------------------------------------- training

inline GmmModel train_ubm_stage(const std::vector<Utterance> &utts, const PipelineConfig &cfg,
                                std::vector<double> *trace = nullptr) {
  std::vector<FeatureMatrix> feats;
  for (std::size_t i : require_split(utts, "train")) feats.push_back(utts[i].features);
  return train_ubm(feats, cfg.ubm, trace);
}

inline std::vector<SufficientStats> utterance_stats(const std::vector<Utterance> &utts,
                                                    const std::vector<std::size_t> &idx, const GmmModel &ubm,
                                                    int workers) {
  std::vector<SufficientStats> stats(idx.size());
  parallel_for(idx.size(), workers, [&](std::size_t k) { stats[k] = accumulate_stats(utts[idx[k]].features, ubm); });
  return stats;
}

inline TMatrixModel train_tmatrix_stage(const std::vector<Utterance> &utts, const GmmModel &ubm,
                                        const PipelineConfig &cfg, int workers,
                                        std::vector<double> *trace = nullptr) {
  std::vector<SufficientStats> stats = utterance_stats(utts, require_split(utts, "train"), ubm, workers);
  return train_tmatrix(stats, ubm, cfg.tmatrix, trace);
}

/// i-vectors of every utterance, one row each, optionally length-normalized.
inline Eigen::MatrixXd extract_all_ivectors(const std::vector<Utterance> &utts, const TMatrixModel &tm,
                                            bool length_norm, int workers) {
  const IVectorExtractor ex(tm);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(utts.size()), tm.ivector_dim());
  parallel_for(utts.size(), workers, [&](std::size_t i) {
    Eigen::VectorXd w = ex.extract(accumulate_stats(utts[i].features, tm.ubm));
    if (length_norm) w /= std::max(w.norm(), 1e-12);
    out.row(static_cast<Eigen::Index>(i)) = w.transpose();
  });
  return out;
}

inline LdaModel train_lda_stage(const std::vector<Utterance> &utts, const Eigen::MatrixXd &vectors, int j) {
  std::vector<std::size_t> train = require_split(utts, "train");
  std::vector<int> labels = room_labels(utts, train);
  return train_lda(compute_scatter(gather_rows(vectors, train), labels), j);
}

inline PldaModel train_plda_stage(const std::vector<Utterance> &utts, const Eigen::MatrixXd &evectors) {
  std::vector<std::size_t> train = require_split(utts, "train");
  return train_plda(gather_rows(evectors, train), room_labels(utts, train));
}

struct Estimators {
  RidgeModel ridge_snr, ridge_t60;
  BottleneckNet bn_snr, bn_t60;
};

struct EstimatorLog {
  std::vector<double> bn_snr_val_mae, bn_t60_val_mae;
};

inline RidgeModel train_ridge_stage(const std::vector<Utterance> &utts, const Eigen::MatrixXd &evectors,
                                    TargetKind target, const PipelineConfig &cfg) {
  std::vector<std::size_t> train = require_split(utts, "train"), val = require_split(utts, "val");
  return select_ridge(gather_rows(evectors, train), training_targets(utts, train, target),
                      gather_rows(evectors, val), training_targets(utts, val, target), cfg.lambda_grid, target);
}

inline BottleneckNet train_bottleneck_stage(const std::vector<Utterance> &utts, const Eigen::MatrixXd &evectors,
                                            TargetKind target, const PipelineConfig &cfg,
                                            std::vector<double> *val_trace = nullptr) {
  std::vector<std::size_t> train = require_split(utts, "train"), val = require_split(utts, "val");
  BottleneckHyper hp = cfg.bottleneck;
  hp.seed = derive_seed(hp.seed, target == TargetKind::kSnrDb ? 1 : 2);
  return train_bottleneck(gather_rows(evectors, train), training_targets(utts, train, target),
                          gather_rows(evectors, val), training_targets(utts, val, target), target, hp, val_trace);
}

inline WadaTable train_wada_stage(const PipelineConfig &cfg, int workers) {
  WadaTableOptions opt;
  opt.step_db = cfg.wada_step_db;
  opt.samples_per_point = cfg.wada_samples_per_point;
  opt.seed = derive_seed(cfg.seed, 5);
  opt.workers = workers;
  return build_wada_table(opt);
}

/// Everything evaluate() needs. `lda` is trained at the largest j of the
/// list; smaller dimensions use its leading columns.
struct ModelSet {
  GmmModel ubm;
  TMatrixModel tmatrix;
  LdaModel lda;
  std::map<int, PldaModel> plda;
  std::map<int, Estimators> estimators;
  WadaTable wada;
};

struct TrainingLog {
  std::vector<double> ubm_loglik, tmatrix_objective;
  Eigen::VectorXd lda_residuals;
  std::map<int, EstimatorLog> estimators;
};

inline Eigen::MatrixXd evectors_at(const Eigen::MatrixXd &ivectors, const LdaModel &lda, int j) {
  return project_rows(ivectors, lda.truncated(j));
}

/// Trains every model from in-memory utterances.
inline ModelSet train_models(const std::vector<Utterance> &utts, const PipelineConfig &cfg, int workers,
                             TrainingLog *log = nullptr) {
  check_split_disjoint(utts);
  ModelSet m;
  m.ubm = train_ubm_stage(utts, cfg, log ? &log->ubm_loglik : nullptr);
  m.tmatrix = train_tmatrix_stage(utts, m.ubm, cfg, workers, log ? &log->tmatrix_objective : nullptr);
  Eigen::MatrixXd iv = extract_all_ivectors(utts, m.tmatrix, cfg.length_norm, workers);
  m.lda = train_lda_stage(utts, iv, cfg.max_j());
  if (log) {
    std::vector<std::size_t> train = select_split(utts, "train");
    log->lda_residuals = lda_residuals(compute_scatter(gather_rows(iv, train), room_labels(utts, train)), m.lda);
  }
  for (int j : cfg.j_list) {
    Eigen::MatrixXd e = evectors_at(iv, m.lda, j);
    m.plda[j] = train_plda_stage(utts, e);
    Estimators &est = m.estimators[j];
    EstimatorLog *el = log ? &log->estimators[j] : nullptr;
    est.ridge_snr = train_ridge_stage(utts, e, TargetKind::kSnrDb, cfg);
    est.ridge_t60 = train_ridge_stage(utts, e, TargetKind::kT60S, cfg);
    est.bn_snr = train_bottleneck_stage(utts, e, TargetKind::kSnrDb, cfg, el ? &el->bn_snr_val_mae : nullptr);
    est.bn_t60 = train_bottleneck_stage(utts, e, TargetKind::kT60S, cfg, el ? &el->bn_t60_val_mae : nullptr);
  }
  m.wada = train_wada_stage(cfg, workers);
  return m;
}

// ----------------------------------------------------------- evaluation

struct VerificationRow {
  RoomType room_type = RoomType::kCompleteRoom;
  int j = 0;
  std::string variant = "none";
  double eer = 0.0;  // percent
  std::size_t trials = 0;
};

struct MetadataRow {
  RoomType room_type = RoomType::kCompleteRoom;
  int j = 0;
  TargetKind target = TargetKind::kSnrDb;
  std::string estimator;  // bn | ridge | wada | mean
  double mae = 0.0;
};

struct EvalReport {
  std::uint64_t seed = 0;
  std::string config_digest;
  std::vector<VerificationRow> verification;  // variant none, every j
  std::vector<MetadataRow> metadata;
  std::vector<VerificationRow> augmentation;  // j = augment_j, every variant plus "constant"
};

/// Scores every (enroll room, test instance) pair of one room type. The
/// room model is the mean of its enrollment e-vectors.
inline std::vector<TrialScore> score_room_type(const std::vector<Utterance> &utts, const Eigen::MatrixXd &evectors,
                                               const PldaModel &plda, RoomType type, int workers) {
  std::vector<std::size_t> enroll = select_split(utts, "enroll", type), test = select_split(utts, "test", type);
  if (enroll.empty() || test.empty())
    fail(ErrorKind::kMissingArtifact, "manifest lacks enroll/test records for room type " + to_string(type));
  std::map<std::string, std::pair<Eigen::VectorXd, int>> sums;
  for (std::size_t i : enroll) {
    auto &[sum, n] = sums[utts[i].record.room_id];
    if (n == 0) sum = Eigen::VectorXd::Zero(evectors.cols());
    sum += evectors.row(static_cast<Eigen::Index>(i)).transpose();
    ++n;
  }
  std::vector<std::string> rooms;
  std::vector<Eigen::VectorXd> models;
  for (const auto &[room, sn] : sums) {
    rooms.push_back(room);
    models.push_back(sn.first / sn.second);
  }
  const PldaScorer scorer(plda);
  std::vector<TrialScore> trials(rooms.size() * test.size());
  parallel_for(test.size(), workers, [&](std::size_t t) {
    const Utterance &u = utts[test[t]];
    Eigen::VectorXd x = evectors.row(static_cast<Eigen::Index>(test[t])).transpose();
    for (std::size_t r = 0; r < rooms.size(); ++r)
      trials[t * rooms.size() + r] = {rooms[r], u.record.path, scorer.score(models[r], x), rooms[r] == u.record.room_id};
  });
  return trials;
}

namespace detail {

inline std::vector<VerificationRow> verify_all_types(const std::vector<Utterance> &utts, const Eigen::MatrixXd &e,
                                                     const PldaModel &plda, const PipelineConfig &cfg, int j,
                                                     const std::string &variant, int workers) {
  std::vector<VerificationRow> rows;
  for (RoomType t : cfg.room_types) {
    std::vector<TrialScore> trials = score_room_type(utts, e, plda, t, workers);
    rows.push_back({t, j, variant, compute_eer(trials), trials.size()});
  }
  return rows;
}

inline std::vector<double> column(const Eigen::VectorXd &v) { return {v.data(), v.data() + v.size()}; }

}  // namespace detail

/// Closed interval spanned by the training labels of one target. Learned
/// estimates are clipped to it; test rooms of other types would otherwise
/// be extrapolated far outside anything the regressors saw.
struct TargetRange {
  double lo = 0.0, hi = 0.0;
  Eigen::VectorXd clip(const Eigen::VectorXd &v) const { return v.cwiseMax(lo).cwiseMin(hi); }
};

inline TargetRange training_range(const std::vector<Utterance> &utts, TargetKind target) {
  Eigen::VectorXd y = training_targets(utts, require_split(utts, "train"), target);
  return {y.minCoeff(), y.maxCoeff()};
}

/// Metadata estimates of every utterance from its e-vector (networks).
inline std::pair<Eigen::VectorXd, Eigen::VectorXd> estimate_metadata(const std::vector<Utterance> &utts,
                                                                     const Estimators &est,
                                                                     const Eigen::MatrixXd &evectors) {
  return {training_range(utts, TargetKind::kSnrDb).clip(predict_bottleneck(est.bn_snr, evectors)),
          training_range(utts, TargetKind::kT60S).clip(predict_bottleneck(est.bn_t60, evectors))};
}

inline std::vector<MetadataRow> metadata_rows(const std::vector<Utterance> &utts, const Eigen::MatrixXd &e,
                                              const Estimators &est, const WadaTable &wada,
                                              const PipelineConfig &cfg, int j) {
  std::vector<std::size_t> train = require_split(utts, "train");
  const double mean_snr = training_targets(utts, train, TargetKind::kSnrDb).mean();
  const double mean_t60 = training_targets(utts, train, TargetKind::kT60S).mean();
  const TargetRange snr_range = training_range(utts, TargetKind::kSnrDb);
  const TargetRange t60_range = training_range(utts, TargetKind::kT60S);
  std::vector<MetadataRow> rows;
  for (RoomType t : cfg.room_types) {
    std::vector<std::size_t> test = select_split(utts, "test", t);
    if (test.empty()) fail(ErrorKind::kMissingArtifact, "manifest lacks test records for " + to_string(t));
    Eigen::MatrixXd x = gather_rows(e, test);
    std::vector<double> snr, t60, wada_est;
    for (std::size_t i : test) {
      snr.push_back(utts[i].record.snr_db);
      t60.push_back(utts[i].record.t60_s);
      wada_est.push_back(wada_lookup(wada, utts[i].wada_g));
    }
    auto add = [&](TargetKind k, const std::string &name, const std::vector<double> &pred) {
      rows.push_back({t, j, k, name, compute_mae(pred, k == TargetKind::kSnrDb ? snr : t60)});
    };
    add(TargetKind::kSnrDb, "bn", detail::column(snr_range.clip(predict_bottleneck(est.bn_snr, x))));
    add(TargetKind::kSnrDb, "ridge", detail::column(snr_range.clip(predict_ridge(est.ridge_snr, x))));
    add(TargetKind::kSnrDb, "wada", wada_est);
    add(TargetKind::kSnrDb, "mean", std::vector<double>(test.size(), mean_snr));
    add(TargetKind::kT60S, "bn", detail::column(t60_range.clip(predict_bottleneck(est.bn_t60, x))));
    add(TargetKind::kT60S, "ridge", detail::column(t60_range.clip(predict_ridge(est.ridge_t60, x))));
    add(TargetKind::kT60S, "mean", std::vector<double>(test.size(), mean_t60));
  }
  return rows;
}

/// i-vectors augmented with estimated metadata, LDA and PLDA retrained per
/// variant. "constant" appends the training means of both estimates to every
/// vector, which must leave the result unchanged.
inline std::vector<VerificationRow> augmentation_rows(const std::vector<Utterance> &utts,
                                                      const Eigen::MatrixXd &ivectors, const ModelSet &models,
                                                      const PipelineConfig &cfg, int workers) {
  const int j = cfg.augment_j;
  auto est_it = models.estimators.find(j);
  if (est_it == models.estimators.end())
    fail(ErrorKind::kMissingArtifact, "no metadata estimators trained at j = " + std::to_string(j));
  auto [snr_est, t60_est] = estimate_metadata(utts, est_it->second, evectors_at(ivectors, models.lda, j));

  std::vector<std::size_t> train = require_split(utts, "train");
  std::vector<double> train_snr, train_t60;
  for (std::size_t i : train) {
    train_snr.push_back(snr_est(static_cast<Eigen::Index>(i)));
    train_t60.push_back(t60_est(static_cast<Eigen::Index>(i)));
  }
  MetadataNormalizer norm{ZScore::fit(train_snr), ZScore::fit(train_t60)};

  std::vector<std::string> names;
  for (AugmentVariant v : cfg.variants) names.push_back(to_string(v));
  if (cfg.constant_control) names.push_back("constant");

  std::vector<VerificationRow> rows;
  for (const std::string &name : names) {
    const bool constant = name == "constant";
    const AugmentVariant v = constant ? AugmentVariant::kSnrT60 : parse_augment_variant(name);
    Eigen::MatrixXd aug(ivectors.rows(), ivectors.cols() + extra_dims(v));
    for (Eigen::Index i = 0; i < ivectors.rows(); ++i) {
      double s = constant ? norm.snr.mean : snr_est(i), t = constant ? norm.t60.mean : t60_est(i);
      aug.row(i) = augment(ivectors.row(i).transpose(), s, t, norm, v).transpose();
    }
    LdaModel lda = train_lda_stage(utts, aug, j);
    Eigen::MatrixXd e = project_rows(aug, lda);
    PldaModel plda = train_plda_stage(utts, e);
    for (VerificationRow &r : detail::verify_all_types(utts, e, plda, cfg, j, name, workers)) rows.push_back(r);
  }
  return rows;
}

inline EvalReport evaluate(const std::vector<Utterance> &utts, const ModelSet &models, const PipelineConfig &cfg,
                           int workers) {
  EvalReport rep;
  rep.seed = cfg.seed;
  rep.config_digest = config_digest(cfg);
  require_split(utts, "enroll");
  require_split(utts, "test");
  check_split_disjoint(utts);
  if (models.tmatrix.ubm.num_components() != models.ubm.num_components())
    fail(ErrorKind::kInvalidArgument, "models: T-matrix was trained on a different UBM");
  Eigen::MatrixXd iv = extract_all_ivectors(utts, models.tmatrix, cfg.length_norm, workers);
  for (int j : cfg.j_list) {
    auto plda = models.plda.find(j);
    auto est = models.estimators.find(j);
    if (plda == models.plda.end()) fail(ErrorKind::kMissingArtifact, "missing PLDA model for j = " + std::to_string(j));
    if (est == models.estimators.end())
      fail(ErrorKind::kMissingArtifact, "missing metadata estimators for j = " + std::to_string(j));
    Eigen::MatrixXd e = evectors_at(iv, models.lda, j);
    for (VerificationRow &r : detail::verify_all_types(utts, e, plda->second, cfg, j, "none", workers))
      rep.verification.push_back(r);
    for (MetadataRow &r : metadata_rows(utts, e, est->second, models.wada, cfg, j)) rep.metadata.push_back(r);
  }
  rep.augmentation = augmentation_rows(utts, iv, models, cfg, workers);
  return rep;
}

}  // namespace evec
