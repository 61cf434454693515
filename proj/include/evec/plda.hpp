// evec/plda.hpp

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

#pragma once

#include <cmath>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "evec/common.hpp"
#include "evec/serialize.hpp"

namespace evec {

/// Two-covariance PLDA: x = y + e with class variable y ~ N(mu, B) and
/// residual e ~ N(0, W).
struct PldaModel {
  Eigen::VectorXd mu;
  Eigen::MatrixXd between;  // B, PSD
  Eigen::MatrixXd within;   // W, PD

  Eigen::Index dim() const { return mu.size(); }
};

namespace detail {

inline void add_relative_ridge(Eigen::MatrixXd &m) {
  const double eps = 1e-6 * m.trace() / static_cast<double>(m.rows());
  m.diagonal().array() += eps;
}

}  // namespace detail

/// Method-of-moments fit. W is the pooled within-room covariance; B is the
/// covariance of the room means minus W / mean(n_r), clipped to PSD. Both
/// receive a 1e-6 trace/dim ridge.
inline PldaModel train_plda(const Eigen::MatrixXd &x, std::span<const int> labels) {
  require(static_cast<std::size_t>(x.rows()) == labels.size(),
          "train_plda: label count does not match vector count");
  require(x.rows() > 0, "train_plda: no vectors");
  const int R = *std::max_element(labels.begin(), labels.end()) + 1;
  const Eigen::Index d = x.cols(), N = x.rows();
  if (R < 2) fail(ErrorKind::kInvalidArgument, "train_plda: need at least two rooms");
  std::vector<int> counts(R, 0);
  Eigen::MatrixXd means = Eigen::MatrixXd::Zero(R, d);
  for (Eigen::Index i = 0; i < N; ++i) {
    means.row(labels[i]) += x.row(i);
    ++counts[labels[i]];
  }
  for (int r = 0; r < R; ++r) {
    if (counts[r] < 2) fail(ErrorKind::kInvalidArgument, "train_plda: every room needs two vectors");
    means.row(r) /= counts[r];
  }

  PldaModel m;
  m.mu = x.colwise().mean().transpose();
  Eigen::MatrixXd centered(N, d);
  for (Eigen::Index i = 0; i < N; ++i) centered.row(i) = x.row(i) - means.row(labels[i]);
  m.within = centered.transpose() * centered / static_cast<double>(N);

  Eigen::MatrixXd dm = means.rowwise() - m.mu.transpose();
  const double avg_n = static_cast<double>(N) / R;
  Eigen::MatrixXd b = dm.transpose() * dm / R - m.within / avg_n;
  b = 0.5 * (b + b.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(b);
  Eigen::VectorXd ev = eig.eigenvalues().cwiseMax(0.0);
  m.between = eig.eigenvectors() * ev.asDiagonal() * eig.eigenvectors().transpose();
  m.between = 0.5 * (m.between + m.between.transpose());

  detail::add_relative_ridge(m.within);
  detail::add_relative_ridge(m.between);
  return m;
}

/// Closed-form same-vs-different log-likelihood ratio
///   s(a, b) = a'Qa/2 + b'Qb/2 + a'Pb + k   (a, b centered by mu)
/// with T = B + W, S = T - B T^-1 B, Q = T^-1 - S^-1, P = T^-1 B S^-1 and
/// k = (log|T| - log|S|) / 2.
class PldaScorer {
 public:
  explicit PldaScorer(const PldaModel &m) : mu_(m.mu) {
    const Eigen::Index d = m.dim();
    require(m.between.rows() == d && m.within.rows() == d, "plda: inconsistent model");
    Eigen::MatrixXd total = m.between + m.within;
    Eigen::LLT<Eigen::MatrixXd> t_llt(total);
    if (t_llt.info() != Eigen::Success)
      fail(ErrorKind::kNumerical, "plda: total covariance is not positive definite");
    Eigen::MatrixXd t_inv = t_llt.solve(Eigen::MatrixXd::Identity(d, d));
    Eigen::MatrixXd schur = total - m.between * t_inv * m.between;
    schur = 0.5 * (schur + schur.transpose());
    Eigen::LLT<Eigen::MatrixXd> s_llt(schur);
    if (s_llt.info() != Eigen::Success)
      fail(ErrorKind::kNumerical, "plda: same-class covariance is not positive definite");
    Eigen::MatrixXd s_inv = s_llt.solve(Eigen::MatrixXd::Identity(d, d));
    q_ = t_inv - s_inv;
    q_ = 0.5 * (q_ + q_.transpose());
    p_ = t_inv * m.between * s_inv;
    p_ = 0.5 * (p_ + p_.transpose());
    auto logdet = [](const Eigen::LLT<Eigen::MatrixXd> &llt) {
      return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    };
    constant_ = 0.5 * (logdet(t_llt) - logdet(s_llt));
  }

  double score(const Eigen::VectorXd &enroll, const Eigen::VectorXd &test) const {
    if (enroll.size() != mu_.size() || test.size() != mu_.size())
      fail(ErrorKind::kInvalidArgument, "plda_score: dimension mismatch");
    Eigen::VectorXd a = enroll - mu_, b = test - mu_;
    return 0.5 * a.dot(q_ * a) + 0.5 * b.dot(q_ * b) + a.dot(p_ * b) + constant_;
  }

 private:
  Eigen::VectorXd mu_;
  Eigen::MatrixXd q_, p_;
  double constant_ = 0.0;
};

inline double plda_score(const Eigen::VectorXd &enroll, const Eigen::VectorXd &test,
                         const PldaModel &m) {
  return PldaScorer(m).score(enroll, test);
}

// "EVPL", u32 version, u32 dim, mu[d], between[d][d], within[d][d].
inline std::string encode_plda(const PldaModel &m) {
  BinaryWriter w;
  w.magic("EVPL", 1);
  w.u32(static_cast<std::uint32_t>(m.dim()));
  w.vec(m.mu);
  w.mat(m.between);
  w.mat(m.within);
  return w.bytes();
}

inline PldaModel decode_plda(std::string bytes) {
  BinaryReader r(std::move(bytes));
  if (r.magic("EVPL") != 1) fail(ErrorKind::kIo, "plda model: unsupported version");
  std::uint32_t d = r.u32();
  PldaModel m;
  m.mu = r.vec(d);
  m.between = r.mat(d, d);
  m.within = r.mat(d, d);
  return m;
}

}  // namespace evec
