// evec/lda.hpp

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

// Environment embeddings: multi-class LDA with rooms as classes.
//
//   S_b = 1/R sum_r (m_r - m)(m_r - m)'
//   S_w = 1/R sum_r 1/n_r sum_k (x_rk - m_r)(x_rk - m_r)'
//
// where m is the mean of all vectors and m_r the mean of room r. The
// projection keeps the top-j solutions of S_b v = lambda S_w v.

#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "evec/common.hpp"
#include "evec/serialize.hpp"

namespace evec {

/// Maps arbitrary class names to dense indices 0..R-1 in first-seen order.
inline std::vector<int> index_labels(std::span<const std::string> names, int *num_classes = nullptr) {
  std::map<std::string, int> ids;
  std::vector<int> out;
  out.reserve(names.size());
  for (const auto &n : names) {
    auto [it, inserted] = ids.try_emplace(n, static_cast<int>(ids.size()));
    out.push_back(it->second);
  }
  if (num_classes) *num_classes = static_cast<int>(ids.size());
  return out;
}

struct ScatterPair {
  Eigen::MatrixXd between;  // S_b
  Eigen::MatrixXd within;   // S_w
  Eigen::VectorXd global_mean;
  int num_rooms = 0;
  std::vector<int> counts;  // n_r
};

/// Rows of `x` are vectors; labels[i] in [0, R) is the room of row i.
/// `allow_singletons` relaxes the two-vectors-per-room requirement.
inline ScatterPair compute_scatter(const Eigen::MatrixXd &x, std::span<const int> labels,
                                   bool allow_singletons = false) {
  require(static_cast<std::size_t>(x.rows()) == labels.size(),
          "compute_scatter: label count does not match vector count");
  require(x.rows() > 0, "compute_scatter: no vectors");
  const int R = *std::max_element(labels.begin(), labels.end()) + 1;
  const Eigen::Index M = x.cols();
  ScatterPair s;
  s.num_rooms = R;
  s.counts.assign(R, 0);
  Eigen::MatrixXd room_sum = Eigen::MatrixXd::Zero(R, M);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    require(labels[i] >= 0, "compute_scatter: negative label");
    room_sum.row(labels[i]) += x.row(i);
    ++s.counts[labels[i]];
  }
  if (R < 2) fail(ErrorKind::kInvalidArgument, "compute_scatter: need at least two rooms");
  for (int r = 0; r < R; ++r) {
    if (s.counts[r] == 0) fail(ErrorKind::kInvalidArgument, "compute_scatter: room with no vectors");
    if (s.counts[r] < 2 && !allow_singletons)
      fail(ErrorKind::kInvalidArgument, "compute_scatter: room with a single vector");
  }
  s.global_mean = x.colwise().mean().transpose();
  Eigen::MatrixXd room_mean = room_sum;
  for (int r = 0; r < R; ++r) room_mean.row(r) /= s.counts[r];

  Eigen::MatrixXd dm = room_mean.rowwise() - s.global_mean.transpose();
  s.between = dm.transpose() * dm / R;

  // Weight each centered row by 1/(R n_r) so one product gives S_w.
  Eigen::MatrixXd centered(x.rows(), M);
  Eigen::VectorXd wts(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    centered.row(i) = x.row(i) - room_mean.row(labels[i]);
    wts(i) = 1.0 / (static_cast<double>(R) * s.counts[labels[i]]);
  }
  s.within = centered.transpose() * wts.asDiagonal() * centered;
  s.between = 0.5 * (s.between + s.between.transpose());
  s.within = 0.5 * (s.within + s.within.transpose());
  return s;
}

/// S_w + eps I with eps = 1e-6 trace(S_w) / M: the matrix the generalized
/// eigenproblem is actually solved against.
inline Eigen::MatrixXd stabilized_within(const ScatterPair &s) {
  const Eigen::Index M = s.within.rows();
  const double eps = 1e-6 * s.within.trace() / static_cast<double>(M);
  Eigen::MatrixXd w = s.within;
  w.diagonal().array() += eps;
  return w;
}

struct LdaModel {
  Eigen::MatrixXd projection;   // M_in x j, columns v_1..v_j
  Eigen::VectorXd mean;         // M_in, the training global mean
  Eigen::VectorXd eigenvalues;  // j, descending

  Eigen::Index input_dim() const { return projection.rows(); }
  Eigen::Index dim() const { return projection.cols(); }

  /// The model restricted to its leading j directions.
  LdaModel truncated(Eigen::Index j) const {
    require(j >= 1 && j <= dim(), "lda: truncation outside [1, j]");
    return {projection.leftCols(j), mean, eigenvalues.head(j)};
  }
};

/// Solves the generalized eigenproblem by whitening with the Cholesky factor
/// of the stabilized S_w, then a symmetric eigendecomposition. Columns are
/// unit length, sorted by descending eigenvalue, and signed so that their
/// largest-magnitude entry is positive.
inline LdaModel train_lda(const ScatterPair &s, Eigen::Index j) {
  const Eigen::Index M = s.between.rows();
  if (j < 1 || j > std::min<Eigen::Index>(M, s.num_rooms - 1))
    fail(ErrorKind::kInvalidArgument, "train_lda: j must be in [1, min(M, R-1)]");
  Eigen::MatrixXd w = stabilized_within(s);
  Eigen::LLT<Eigen::MatrixXd> llt(w);
  if (llt.info() != Eigen::Success || !(s.within.trace() > 0.0))
    fail(ErrorKind::kNumerical, "train_lda: within-class scatter is singular");
  Eigen::MatrixXd L = llt.matrixL();
  auto Lt = L.triangularView<Eigen::Lower>();
  // C = L^-1 S_b L^-T
  Eigen::MatrixXd tmp = Lt.solve(s.between);
  Eigen::MatrixXd c = Lt.solve(tmp.transpose());
  c = 0.5 * (c + c.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(c);
  if (eig.info() != Eigen::Success) fail(ErrorKind::kNumerical, "train_lda: eigensolver failed");

  LdaModel m;
  m.mean = s.global_mean;
  m.projection.resize(M, j);
  m.eigenvalues.resize(j);
  for (Eigen::Index k = 0; k < j; ++k) {
    const Eigen::Index src = M - 1 - k;  // eigenvalues come ascending
    m.eigenvalues(k) = eig.eigenvalues()(src);
    Eigen::VectorXd v = L.transpose().triangularView<Eigen::Upper>().solve(
        eig.eigenvectors().col(src));
    v.normalize();
    Eigen::Index arg;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;
    m.projection.col(k) = v;
  }
  if (!m.projection.allFinite()) fail(ErrorKind::kNumerical, "train_lda: non-finite projection");
  return m;
}

/// ||S_b v - lambda S_w' v|| / ||S_b v|| for every kept column, with S_w'
/// the stabilized within-class scatter.
inline Eigen::VectorXd lda_residuals(const ScatterPair &s, const LdaModel &m) {
  Eigen::MatrixXd w = stabilized_within(s);
  Eigen::VectorXd out(m.dim());
  for (Eigen::Index k = 0; k < m.dim(); ++k) {
    Eigen::VectorXd v = m.projection.col(k);
    Eigen::VectorXd sb = s.between * v;
    out(k) = (sb - m.eigenvalues(k) * w * v).norm() / sb.norm();
  }
  return out;
}

/// e = A'(x - mean), row-wise over a batch.
inline Eigen::MatrixXd project_rows(const Eigen::MatrixXd &x, const LdaModel &m) {
  if (x.cols() != m.input_dim()) fail(ErrorKind::kInvalidArgument, "project_rows: dimension mismatch");
  return (x.rowwise() - m.mean.transpose()) * m.projection;
}

inline Eigen::VectorXd project(const Eigen::VectorXd &x, const LdaModel &m) {
  if (x.size() != m.input_dim()) fail(ErrorKind::kInvalidArgument, "project: dimension mismatch");
  return m.projection.transpose() * (x - m.mean);
}

// "EVLD", u32 version, u32 M_in, u32 j, mean[M_in], eigenvalues[j],
// projection[M_in][j].
inline std::string encode_lda(const LdaModel &m) {
  BinaryWriter w;
  w.magic("EVLD", 1);
  w.u32(static_cast<std::uint32_t>(m.input_dim()));
  w.u32(static_cast<std::uint32_t>(m.dim()));
  w.vec(m.mean);
  w.vec(m.eigenvalues);
  w.mat(m.projection);
  return w.bytes();
}

inline LdaModel decode_lda(std::string bytes) {
  BinaryReader r(std::move(bytes));
  if (r.magic("EVLD") != 1) fail(ErrorKind::kIo, "lda model: unsupported version");
  std::uint32_t M = r.u32(), j = r.u32();
  LdaModel m;
  m.mean = r.vec(M);
  m.eigenvalues = r.vec(j);
  m.projection = r.mat(M, j);
  return m;
}

}  // namespace evec
