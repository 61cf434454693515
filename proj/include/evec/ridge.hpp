// evec/ridge.hpp

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
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "evec/common.hpp"
#include "evec/serialize.hpp"

namespace evec {

enum class TargetKind { kSnrDb, kT60S };

inline std::string to_string(TargetKind t) { return t == TargetKind::kSnrDb ? "snr_db" : "t60_s"; }

struct RidgeModel {
  Eigen::VectorXd beta;  // weights, then the intercept when fitted
  double lambda = 0.0;
  bool has_intercept = true;
  TargetKind target = TargetKind::kSnrDb;

  Eigen::Index input_dim() const { return beta.size() - (has_intercept ? 1 : 0); }
};

/// Design matrix with a trailing constant-one column when requested.
inline Eigen::MatrixXd ridge_design(const Eigen::MatrixXd &x, bool intercept) {
  if (!intercept) return x;
  Eigen::MatrixXd a(x.rows(), x.cols() + 1);
  a.leftCols(x.cols()) = x;
  a.col(x.cols()).setOnes();
  return a;
}

/// Normal-equation matrix X'X + lambda I~, with I~ zero in the intercept slot.
inline Eigen::MatrixXd ridge_system(const Eigen::MatrixXd &design, double lambda, bool intercept) {
  Eigen::MatrixXd g = design.transpose() * design;
  Eigen::Index penalized = design.cols() - (intercept ? 1 : 0);
  g.diagonal().head(penalized).array() += lambda;
  return g;
}

/// Solves (X'X + lambda I~) beta = X'y by Cholesky. Fails when the system is
/// singular, e.g. collinear inputs at lambda = 0.
inline RidgeModel train_ridge(const Eigen::MatrixXd &x, const Eigen::VectorXd &y, double lambda,
                              TargetKind target = TargetKind::kSnrDb, bool intercept = true) {
  require(x.rows() == y.size(), "train_ridge: row count mismatch");
  require(x.rows() >= 2, "train_ridge: need at least two samples");
  require(lambda >= 0.0, "train_ridge: lambda must be non-negative");
  Eigen::MatrixXd a = ridge_design(x, intercept);
  Eigen::MatrixXd g = ridge_system(a, lambda, intercept);
  Eigen::LLT<Eigen::MatrixXd> llt(g);
  if (llt.info() != Eigen::Success || llt.rcond() < 1e-13)
    fail(ErrorKind::kNumerical, "train_ridge: singular normal equations");
  RidgeModel m;
  m.beta = llt.solve(a.transpose() * y);
  m.lambda = lambda;
  m.has_intercept = intercept;
  m.target = target;
  if (!m.beta.allFinite()) fail(ErrorKind::kNumerical, "train_ridge: non-finite solution");
  return m;
}

inline double predict_ridge(const RidgeModel &m, const Eigen::VectorXd &x) {
  if (x.size() != m.input_dim()) fail(ErrorKind::kInvalidArgument, "predict_ridge: dimension mismatch");
  double y = m.beta.head(x.size()).dot(x);
  if (m.has_intercept) y += m.beta(x.size());
  return y;
}

inline Eigen::VectorXd predict_ridge(const RidgeModel &m, const Eigen::MatrixXd &x) {
  if (x.cols() != m.input_dim()) fail(ErrorKind::kInvalidArgument, "predict_ridge: dimension mismatch");
  Eigen::VectorXd y = x * m.beta.head(x.cols());
  if (m.has_intercept) y.array() += m.beta(x.cols());
  return y;
}

/// Decades 1e-3 .. 1e3.
inline std::vector<double> default_lambda_grid() {
  std::vector<double> g;
  for (int e = -3; e <= 3; ++e) g.push_back(std::pow(10.0, e));
  return g;
}

/// Fits one model per grid value and keeps the one with the lowest
/// validation MAE (ties go to the smaller lambda).
inline RidgeModel select_ridge(const Eigen::MatrixXd &x, const Eigen::VectorXd &y,
                               const Eigen::MatrixXd &x_val, const Eigen::VectorXd &y_val,
                               const std::vector<double> &grid, TargetKind target) {
  require(!grid.empty(), "select_ridge: empty lambda grid");
  require(x_val.rows() > 0, "select_ridge: empty validation set");
  RidgeModel best;
  double best_mae = std::numeric_limits<double>::infinity();
  for (double lambda : grid) {
    RidgeModel m = train_ridge(x, y, lambda, target);
    double mae = (predict_ridge(m, x_val) - y_val).cwiseAbs().mean();
    if (mae < best_mae) {
      best_mae = mae;
      best = m;
    }
  }
  return best;
}

// "EVRR", u32 version, u32 input dim, u32 intercept flag, u32 target,
// f64 lambda, beta[...].
inline std::string encode_ridge(const RidgeModel &m) {
  BinaryWriter w;
  w.magic("EVRR", 1);
  w.u32(static_cast<std::uint32_t>(m.input_dim()));
  w.u32(m.has_intercept ? 1 : 0);
  w.u32(m.target == TargetKind::kSnrDb ? 0 : 1);
  w.f64(m.lambda);
  w.vec(m.beta);
  return w.bytes();
}

inline RidgeModel decode_ridge(std::string bytes) {
  BinaryReader r(std::move(bytes));
  if (r.magic("EVRR") != 1) fail(ErrorKind::kIo, "ridge model: unsupported version");
  RidgeModel m;
  std::uint32_t dim = r.u32();
  m.has_intercept = r.u32() != 0;
  m.target = r.u32() == 0 ? TargetKind::kSnrDb : TargetKind::kT60S;
  m.lambda = r.f64();
  m.beta = r.vec(dim + (m.has_intercept ? 1 : 0));
  return m;
}

}  // namespace evec
