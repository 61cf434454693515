// evec/gmm.hpp

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

// Diagonal-covariance GMM used as the universal background model, its EM
// trainer, and zeroth/first-order Baum-Welch statistics.

#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "evec/common.hpp"
#include "evec/features.hpp"
#include "evec/serialize.hpp"

namespace evec {

struct GmmModel {
  Eigen::VectorXd weights;    // C
  Eigen::MatrixXd means;      // C x F
  Eigen::MatrixXd variances;  // C x F

  Eigen::Index num_components() const { return weights.size(); }
  Eigen::Index dim() const { return means.cols(); }
};

/// Precomputed terms for evaluating all component log-densities of a batch of
/// frames with two matrix products.
class GmmScorer {
 public:
  explicit GmmScorer(const GmmModel &gmm) {
    const Eigen::Index C = gmm.num_components(), F = gmm.dim();
    require(C > 0 && F > 0, "gmm: empty model");
    Eigen::ArrayXXd inv_var = gmm.variances.array().inverse();
    linear_ = (gmm.means.array() * inv_var).matrix();
    quadratic_ = (-0.5 * inv_var).matrix();
    offset_.resize(C);
    for (Eigen::Index c = 0; c < C; ++c) {
      offset_(c) = std::log(gmm.weights(c)) -
                   0.5 * (F * std::log(2.0 * std::numbers::pi) +
                          gmm.variances.row(c).array().log().sum() +
                          (gmm.means.row(c).array().square() * inv_var.row(c)).sum());
    }
  }

  /// Per-frame log-likelihood of the mixture; writes normalized posteriors
  /// (rows sum to one) into `post`.
  Eigen::VectorXd posteriors(const Eigen::Ref<const Eigen::MatrixXd> &x,
                             Eigen::MatrixXd *post) const {
    Eigen::MatrixXd ll = x * linear_.transpose() + x.array().square().matrix() * quadratic_.transpose();
    ll.rowwise() += offset_.transpose();
    Eigen::VectorXd frame_ll(x.rows());
    for (Eigen::Index t = 0; t < x.rows(); ++t) {
      double m = ll.row(t).maxCoeff();
      double s = (ll.row(t).array() - m).exp().sum();
      frame_ll(t) = m + std::log(s);
    }
    ll.colwise() -= frame_ll;
    *post = ll.array().exp().matrix();
    return frame_ll;
  }

 private:
  Eigen::MatrixXd linear_;
  Eigen::MatrixXd quadratic_;
  Eigen::VectorXd offset_;
};

struct SufficientStats {
  Eigen::VectorXd n;  // C zeroth-order
  Eigen::MatrixXd f;  // C x F first-order, uncentered
};

inline SufficientStats accumulate_stats(const FeatureMatrix &features, const GmmModel &ubm) {
  if (features.dim() != ubm.dim())
    fail(ErrorKind::kInvalidArgument, "accumulate_stats: feature dimension does not match UBM");
  GmmScorer scorer(ubm);
  Eigen::MatrixXd post;
  scorer.posteriors(features.frames, &post);
  SufficientStats s;
  s.n = post.colwise().sum().transpose();
  s.f = post.transpose() * features.frames;
  return s;
}

namespace detail {

inline Eigen::MatrixXd stack_frames(std::span<const FeatureMatrix> feats) {
  Eigen::Index rows = 0, F = feats.empty() ? 0 : feats.front().dim();
  for (const auto &f : feats) {
    require(f.dim() == F, "train_ubm: inconsistent feature dimensions");
    rows += f.num_frames();
  }
  Eigen::MatrixXd x(rows, F);
  Eigen::Index r = 0;
  for (const auto &f : feats) {
    x.middleRows(r, f.num_frames()) = f.frames;
    r += f.num_frames();
  }
  return x;
}

/// k-means++ seeding followed by a few Lloyd iterations on a subsample.
inline Eigen::MatrixXd kmeans_init(const Eigen::MatrixXd &x, Eigen::Index C, std::mt19937_64 &rng,
                                   Eigen::VectorXi *assign_out) {
  const Eigen::Index N = x.rows();
  Eigen::MatrixXd centres(C, x.cols());
  std::uniform_int_distribution<Eigen::Index> pick(0, N - 1);
  centres.row(0) = x.row(pick(rng));
  Eigen::VectorXd d2 = (x.rowwise() - centres.row(0)).rowwise().squaredNorm();
  for (Eigen::Index c = 1; c < C; ++c) {
    double total = d2.sum();
    Eigen::Index chosen = pick(rng);
    if (total > 0.0) {
      double u = std::uniform_real_distribution<double>(0.0, total)(rng);
      double acc = 0.0;
      for (Eigen::Index i = 0; i < N; ++i) {
        acc += d2(i);
        if (acc >= u) {
          chosen = i;
          break;
        }
      }
    }
    centres.row(c) = x.row(chosen);
    d2 = d2.cwiseMin((x.rowwise() - centres.row(c)).rowwise().squaredNorm());
  }
  Eigen::VectorXi assign(N);
  for (int it = 0; it < 5; ++it) {
    Eigen::VectorXd cn = centres.rowwise().squaredNorm();
    Eigen::MatrixXd dist = (-2.0 * x * centres.transpose()).rowwise() + cn.transpose();
    for (Eigen::Index i = 0; i < N; ++i) dist.row(i).minCoeff(&assign(i));
    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(C, x.cols());
    Eigen::VectorXd count = Eigen::VectorXd::Zero(C);
    for (Eigen::Index i = 0; i < N; ++i) {
      sum.row(assign(i)) += x.row(i);
      count(assign(i)) += 1.0;
    }
    for (Eigen::Index c = 0; c < C; ++c)
      if (count(c) > 0) centres.row(c) = sum.row(c) / count(c);
  }
  *assign_out = assign;
  return centres;
}

}  // namespace detail

struct UbmOptions {
  int num_components = 64;
  int iterations = 10;
  std::uint64_t seed = 1;
  Eigen::Index init_subsample = 20000;
  double variance_floor_ratio = 1e-4;  // relative to the global variance
};

/// EM training of a diagonal GMM. `loglik_trace`, when given, receives the
/// total data log-likelihood of the initial model and after every M-step.
inline GmmModel train_ubm(std::span<const FeatureMatrix> features, const UbmOptions &opt,
                          std::vector<double> *loglik_trace = nullptr) {
  const Eigen::Index C = opt.num_components;
  require(C >= 1 && opt.iterations >= 0, "train_ubm: bad options");
  const Eigen::MatrixXd x = detail::stack_frames(features);
  const Eigen::Index N = x.rows(), F = x.cols();
  if (N < 50 * C)
    fail(ErrorKind::kInvalidArgument, "train_ubm: insufficient data (need >= 50 frames per component)");

  const Eigen::RowVectorXd global_mean = x.colwise().mean();
  const Eigen::RowVectorXd global_var =
      ((x.rowwise() - global_mean).array().square().colwise().sum() / static_cast<double>(N)).matrix();
  const Eigen::RowVectorXd floor =
      (opt.variance_floor_ratio * global_var.array()).max(1e-12).matrix();

  std::mt19937_64 rng(derive_seed(opt.seed, 0x75626d));
  Eigen::MatrixXd sub;
  if (N > opt.init_subsample) {
    std::vector<Eigen::Index> idx(N);
    for (Eigen::Index i = 0; i < N; ++i) idx[i] = i;
    std::shuffle(idx.begin(), idx.end(), rng);
    sub.resize(opt.init_subsample, F);
    for (Eigen::Index i = 0; i < opt.init_subsample; ++i) sub.row(i) = x.row(idx[i]);
  } else {
    sub = x;
  }
  Eigen::VectorXi assign;
  GmmModel gmm;
  gmm.means = detail::kmeans_init(sub, C, rng, &assign);
  gmm.weights = Eigen::VectorXd::Zero(C);
  gmm.variances = Eigen::MatrixXd::Zero(C, F);
  for (Eigen::Index i = 0; i < sub.rows(); ++i) {
    gmm.weights(assign(i)) += 1.0;
    gmm.variances.row(assign(i)) += (sub.row(i) - gmm.means.row(assign(i))).array().square().matrix();
  }
  for (Eigen::Index c = 0; c < C; ++c) {
    if (gmm.weights(c) > 1.0) gmm.variances.row(c) /= gmm.weights(c);
    else gmm.variances.row(c) = global_var;
    gmm.variances.row(c) = gmm.variances.row(c).cwiseMax(floor);
  }
  gmm.weights = (gmm.weights.array() + 1.0).matrix();
  gmm.weights /= gmm.weights.sum();

  std::vector<int> reseeds(C, 0);
  constexpr Eigen::Index kChunk = 8192;
  auto e_step = [&](Eigen::VectorXd *n, Eigen::MatrixXd *sx, Eigen::MatrixXd *sxx) {
    GmmScorer scorer(gmm);
    n->setZero(C);
    sx->setZero(C, F);
    sxx->setZero(C, F);
    double ll = 0.0;
    Eigen::MatrixXd post;
    for (Eigen::Index r = 0; r < N; r += kChunk) {
      Eigen::Index rows = std::min(kChunk, N - r);
      auto block = x.middleRows(r, rows);
      ll += scorer.posteriors(block, &post).sum();
      *n += post.colwise().sum().transpose();
      *sx += post.transpose() * block;
      *sxx += post.transpose() * block.array().square().matrix();
    }
    return ll;
  };

  Eigen::VectorXd n;
  Eigen::MatrixXd sx, sxx;
  for (int it = 0; it <= opt.iterations; ++it) {
    double ll = e_step(&n, &sx, &sxx);
    if (!std::isfinite(ll)) fail(ErrorKind::kNumerical, "train_ubm: non-finite log-likelihood");
    if (loglik_trace) loglik_trace->push_back(ll);
    if (it == opt.iterations) break;
    for (Eigen::Index c = 0; c < C; ++c) {
      if (n(c) < 1e-6) {
        // Numerically empty: re-seed on a random frame with a negligible weight.
        if (++reseeds[c] > 1)
          fail(ErrorKind::kNumerical, "train_ubm: component stayed empty after re-seeding");
        std::uniform_int_distribution<Eigen::Index> pick(0, N - 1);
        gmm.means.row(c) = x.row(pick(rng));
        gmm.variances.row(c) = global_var.cwiseMax(floor);
        gmm.weights(c) = 1e-8;
        continue;
      }
      gmm.weights(c) = n(c) / static_cast<double>(N);
      gmm.means.row(c) = sx.row(c) / n(c);
      gmm.variances.row(c) =
          (sxx.row(c) / n(c) - gmm.means.row(c).array().square().matrix()).cwiseMax(floor);
    }
    gmm.weights /= gmm.weights.sum();
  }
  return gmm;
}

// "EVGM", u32 version, u32 C, u32 F, weights[C], means[C][F], variances[C][F].
inline std::string encode_gmm(const GmmModel &g) {
  BinaryWriter w;
  w.magic("EVGM", 1);
  w.u32(static_cast<std::uint32_t>(g.num_components()));
  w.u32(static_cast<std::uint32_t>(g.dim()));
  w.vec(g.weights);
  w.mat(g.means);
  w.mat(g.variances);
  return w.bytes();
}

inline GmmModel decode_gmm(std::string bytes) {
  BinaryReader r(std::move(bytes));
  if (r.magic("EVGM") != 1) fail(ErrorKind::kIo, "gmm model: unsupported version");
  std::uint32_t C = r.u32(), F = r.u32();
  GmmModel g;
  g.weights = r.vec(C);
  g.means = r.mat(C, F);
  g.variances = r.mat(C, F);
  return g;
}

}  // namespace evec
