// evec/ivector.hpp

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

// Total-variability model. A supervector offset T w (w ~ N(0, I)) is added
// to the UBM means; the i-vector is the posterior mean of w given an
// utterance's Baum-Welch statistics:
//
//   L = I + sum_c n_c T_c' S_c^-1 T_c
//   w = L^-1 sum_c T_c' S_c^-1 (f_c - n_c m_c)
//
// T_c is the F x D block of T for component c, S_c its diagonal covariance.

#pragma once

#include <cmath>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "evec/common.hpp"
#include "evec/gmm.hpp"
#include "evec/serialize.hpp"

namespace evec {

struct TMatrixModel {
  Eigen::MatrixXd T;  // (C*F) x D, row c*F + f
  GmmModel ubm;

  Eigen::Index ivector_dim() const { return T.cols(); }
};

/// Posterior of the latent factor for one utterance.
struct IVectorPosterior {
  Eigen::VectorXd mean;       // D
  Eigen::MatrixXd precision;  // D x D
  Eigen::VectorXd linear;     // T' S^-1 f~
  double log_det_precision = 0.0;
};

/// Caches the per-component terms of a fixed T-matrix so that posteriors for
/// many utterances cost O(C D^2 + D^3) each.
class IVectorExtractor {
 public:
  explicit IVectorExtractor(const TMatrixModel &model) : model_(model) {
    const GmmModel &g = model.ubm;
    C_ = g.num_components();
    F_ = g.dim();
    D_ = model.T.cols();
    require(model.T.rows() == C_ * F_, "ivector: T-matrix rows do not match UBM C*F");
    inv_var_.resize(C_ * F_);
    for (Eigen::Index c = 0; c < C_; ++c)
      for (Eigen::Index f = 0; f < F_; ++f) inv_var_(c * F_ + f) = 1.0 / g.variances(c, f);
    t_sinv_ = (model.T.array().colwise() * inv_var_.array()).matrix().transpose();  // D x CF
    // Column c holds vec(T_c' S_c^-1 T_c).
    quad_.resize(D_ * D_, C_);
    for (Eigen::Index c = 0; c < C_; ++c) {
      Eigen::MatrixXd p = t_sinv_.middleCols(c * F_, F_) * model.T.middleRows(c * F_, F_);
      quad_.col(c) = Eigen::Map<const Eigen::VectorXd>(p.data(), D_ * D_);
    }
  }

  Eigen::Index dim() const { return D_; }

  /// Centered first-order statistics flattened to a CF vector.
  Eigen::VectorXd centered(const SufficientStats &s) const {
    if (s.n.size() != C_ || s.f.rows() != C_ || s.f.cols() != F_)
      fail(ErrorKind::kInvalidArgument, "ivector: statistics do not match the UBM");
    Eigen::MatrixXd ft = s.f - s.n.asDiagonal() * model_.ubm.means;  // C x F
    Eigen::VectorXd v(C_ * F_);
    for (Eigen::Index c = 0; c < C_; ++c) v.segment(c * F_, F_) = ft.row(c).transpose();
    return v;
  }

  IVectorPosterior posterior(const SufficientStats &s) const {
    IVectorPosterior p;
    p.linear = t_sinv_ * centered(s);
    Eigen::VectorXd lv = quad_ * s.n;
    p.precision = Eigen::Map<const Eigen::MatrixXd>(lv.data(), D_, D_);
    p.precision.diagonal().array() += 1.0;
    p.precision = 0.5 * (p.precision + p.precision.transpose());
    Eigen::LLT<Eigen::MatrixXd> llt(p.precision);
    if (llt.info() != Eigen::Success)
      fail(ErrorKind::kNumerical, "ivector: posterior precision is not positive definite");
    p.mean = llt.solve(p.linear);
    p.log_det_precision = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    if (!p.mean.allFinite()) fail(ErrorKind::kNumerical, "ivector: non-finite posterior mean");
    return p;
  }

  Eigen::VectorXd extract(const SufficientStats &s) const { return posterior(s).mean; }

 private:
  const TMatrixModel &model_;
  Eigen::Index C_ = 0, F_ = 0, D_ = 0;
  Eigen::VectorXd inv_var_;
  Eigen::MatrixXd t_sinv_;
  Eigen::MatrixXd quad_;
};

inline Eigen::VectorXd extract_ivector(const SufficientStats &stats, const TMatrixModel &model) {
  return IVectorExtractor(model).extract(stats);
}

struct TMatrixOptions {
  int ivector_dim = 100;
  int iterations = 10;
  std::uint64_t seed = 1;
  double init_scale = 0.1;
};

/// EM for the total-variability matrix. `objective_trace` receives the
/// auxiliary log-likelihood sum_u (w_u' b_u - log|L_u|) / 2 of the initial
/// matrix and after every M-step; EM keeps it non-decreasing.
inline TMatrixModel train_tmatrix(std::span<const SufficientStats> stats, const GmmModel &ubm,
                                  const TMatrixOptions &opt,
                                  std::vector<double> *objective_trace = nullptr) {
  const Eigen::Index C = ubm.num_components(), F = ubm.dim(), D = opt.ivector_dim;
  const Eigen::Index U = static_cast<Eigen::Index>(stats.size());
  require(D >= 1 && D < C * F, "train_tmatrix: need 1 <= D < C*F");
  if (U < D) fail(ErrorKind::kInvalidArgument, "train_tmatrix: fewer utterances than i-vector dimension");

  TMatrixModel model;
  model.ubm = ubm;
  model.T.resize(C * F, D);
  std::mt19937_64 rng(derive_seed(opt.seed, 0x746d6174));
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (Eigen::Index r = 0; r < model.T.rows(); ++r)
    for (Eigen::Index c = 0; c < D; ++c) model.T(r, c) = opt.init_scale * gauss(rng);

  Eigen::MatrixXd n_all(U, C);
  for (Eigen::Index u = 0; u < U; ++u) n_all.row(u) = stats[u].n.transpose();

  for (int it = 0; it <= opt.iterations; ++it) {
    IVectorExtractor ext(model);
    double objective = 0.0;
    Eigen::MatrixXd second(D * D, U);  // vec(L^-1 + w w') per utterance
    Eigen::MatrixXd first = Eigen::MatrixXd::Zero(C * F, D);
    for (Eigen::Index u = 0; u < U; ++u) {
      IVectorPosterior p = ext.posterior(stats[u]);
      objective += 0.5 * (p.mean.dot(p.linear) - p.log_det_precision);
      if (it == opt.iterations) continue;
      Eigen::MatrixXd e = p.precision.llt().solve(Eigen::MatrixXd::Identity(D, D));
      e.noalias() += p.mean * p.mean.transpose();
      second.col(u) = Eigen::Map<const Eigen::VectorXd>(e.data(), D * D);
      first.noalias() += ext.centered(stats[u]) * p.mean.transpose();
    }
    if (!std::isfinite(objective)) fail(ErrorKind::kNumerical, "train_tmatrix: non-finite objective");
    if (objective_trace) objective_trace->push_back(objective);
    if (it == opt.iterations) break;

    Eigen::MatrixXd acc = second * n_all;  // column c: vec(sum_u n_uc E_u)
    for (Eigen::Index c = 0; c < C; ++c) {
      Eigen::Map<const Eigen::MatrixXd> a(acc.col(c).data(), D, D);
      Eigen::MatrixXd as = 0.5 * (a + a.transpose());
      Eigen::LLT<Eigen::MatrixXd> llt(as);
      if (llt.info() != Eigen::Success)
        fail(ErrorKind::kNumerical, "train_tmatrix: singular M-step system");
      model.T.middleRows(c * F, F) = llt.solve(first.middleRows(c * F, F).transpose()).transpose();
    }
    if (!model.T.allFinite()) fail(ErrorKind::kNumerical, "train_tmatrix: non-finite T-matrix");
  }
  return model;
}

// "EVTM", u32 version, u32 C, u32 F, u32 D, UBM weights/means/variances,
// then T[(C*F)][D].
inline std::string encode_tmatrix(const TMatrixModel &m) {
  BinaryWriter w;
  w.magic("EVTM", 1);
  w.u32(static_cast<std::uint32_t>(m.ubm.num_components()));
  w.u32(static_cast<std::uint32_t>(m.ubm.dim()));
  w.u32(static_cast<std::uint32_t>(m.T.cols()));
  w.vec(m.ubm.weights);
  w.mat(m.ubm.means);
  w.mat(m.ubm.variances);
  w.mat(m.T);
  return w.bytes();
}

inline TMatrixModel decode_tmatrix(std::string bytes) {
  BinaryReader r(std::move(bytes));
  if (r.magic("EVTM") != 1) fail(ErrorKind::kIo, "t-matrix model: unsupported version");
  std::uint32_t C = r.u32(), F = r.u32(), D = r.u32();
  TMatrixModel m;
  m.ubm.weights = r.vec(C);
  m.ubm.means = r.mat(C, F);
  m.ubm.variances = r.mat(C, F);
  m.T = r.mat(static_cast<Eigen::Index>(C) * F, D);
  return m;
}

}  // namespace evec
