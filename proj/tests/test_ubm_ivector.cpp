// tests/test_ubm_ivector.cpp

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

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "evec/gmm.hpp"
#include "evec/ivector.hpp"
#include "test_util.hpp"

namespace evec {
namespace {

FeatureMatrix as_features(Eigen::MatrixXd x) {
  FeatureMatrix f;
  f.frames = std::move(x);
  return f;
}

// Two-cluster data: weights 0.3 / 0.7, means 10 sigma apart.
FeatureMatrix two_clusters(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::bernoulli_distribution first(0.3);
  Eigen::MatrixXd x(n, 2);
  for (int i = 0; i < n; ++i) {
    double cx = first(rng) ? -5.0 : 5.0;
    x(i, 0) = cx + g(rng);
    x(i, 1) = 1.0 + g(rng);
  }
  return as_features(x);
}

GmmModel random_gmm(int C, int F, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.5, 2.0);
  GmmModel g;
  g.weights.resize(C);
  g.variances.resize(C, F);
  for (int c = 0; c < C; ++c) g.weights(c) = u(rng);
  g.weights /= g.weights.sum();
  for (int i = 0; i < C * F; ++i) g.variances.data()[i] = u(rng);
  g.means = random_matrix(C, F, seed + 1);
  return g;
}

// Posteriors by a per-frame, per-component loop.
Eigen::MatrixXd loop_posteriors(const Eigen::MatrixXd &x, const GmmModel &g) {
  Eigen::MatrixXd post(x.rows(), g.num_components());
  for (Eigen::Index t = 0; t < x.rows(); ++t) {
    std::vector<double> lp(g.num_components());
    double mx = -INFINITY;
    for (Eigen::Index c = 0; c < g.num_components(); ++c) {
      double s = std::log(g.weights(c));
      for (Eigen::Index f = 0; f < g.dim(); ++f) {
        double d = x(t, f) - g.means(c, f);
        s -= 0.5 * (std::log(2 * std::numbers::pi * g.variances(c, f)) + d * d / g.variances(c, f));
      }
      lp[c] = s;
      mx = std::max(mx, s);
    }
    double z = 0.0;
    for (double v : lp) z += std::exp(v - mx);
    for (Eigen::Index c = 0; c < g.num_components(); ++c) post(t, c) = std::exp(lp[c] - mx) / z;
  }
  return post;
}

void expect_non_decreasing(const std::vector<double> &trace, double rel_slack) {
  for (std::size_t i = 1; i < trace.size(); ++i)
    EXPECT_GE(trace[i], trace[i - 1] - rel_slack * std::abs(trace[i - 1])) << "iteration " << i;
}

TEST(TrainUbm, SingleComponentClosedForm) {
  FeatureMatrix f = as_features(random_matrix(500, 3, 4));
  f.frames.col(1) *= 3.0;
  UbmOptions opt;
  opt.num_components = 1;
  opt.iterations = 2;
  GmmModel g = train_ubm(std::span(&f, 1), opt);
  Eigen::RowVectorXd mean = f.frames.colwise().mean();
  Eigen::RowVectorXd var = (f.frames.rowwise() - mean).array().square().colwise().mean();
  EXPECT_NEAR(g.weights(0), 1.0, 1e-12);
  EXPECT_LE((g.means.row(0) - mean).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE((g.variances.row(0) - var).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(TrainUbm, RecoversSeparatedClusters) {
  FeatureMatrix f = two_clusters(4000, 2);
  UbmOptions opt;
  opt.num_components = 2;
  opt.iterations = 10;
  std::vector<double> trace;
  GmmModel g = train_ubm(std::span(&f, 1), opt, &trace);
  Eigen::Index lo = g.means(0, 0) < g.means(1, 0) ? 0 : 1, hi = 1 - lo;
  EXPECT_NEAR(g.means(lo, 0), -5.0, 0.1);
  EXPECT_NEAR(g.means(hi, 0), 5.0, 0.1);
  EXPECT_NEAR(g.means(lo, 1), 1.0, 0.1);
  EXPECT_NEAR(g.weights(lo), 0.3, 0.05);
  EXPECT_NEAR(g.weights(hi), 0.7, 0.05);
  EXPECT_NEAR(g.weights.sum(), 1.0, 1e-9);
  ASSERT_EQ(trace.size(), 11u);
  expect_non_decreasing(trace, 1e-9);
}

TEST(TrainUbm, LikelihoodMonotoneOnFeatures) {
  std::vector<FeatureMatrix> feats;
  for (int u = 0; u < 6; ++u) feats.push_back(as_features(random_matrix(300, 4, 10 + u)));
  for (auto &f : feats) f.frames.col(0) = f.frames.col(0).array().square();  // skewed
  UbmOptions opt;
  opt.num_components = 8;
  opt.iterations = 10;
  std::vector<double> trace;
  GmmModel g = train_ubm(feats, opt, &trace);
  expect_non_decreasing(trace, 1e-6);
  Eigen::MatrixXd x = detail::stack_frames(feats);
  Eigen::RowVectorXd var = (x.rowwise() - x.colwise().mean()).array().square().colwise().mean();
  for (Eigen::Index c = 0; c < g.num_components(); ++c)
    for (Eigen::Index f = 0; f < g.dim(); ++f) EXPECT_GE(g.variances(c, f), 1e-4 * var(f) * (1 - 1e-12));
}

TEST(TrainUbm, InsufficientDataAndDeterminism) {
  FeatureMatrix f = as_features(random_matrix(99, 2, 1));
  UbmOptions opt;
  opt.num_components = 2;
  expect_error(ErrorKind::kInvalidArgument, [&] { train_ubm(std::span(&f, 1), opt); }, "insufficient");
  FeatureMatrix g = two_clusters(1000, 8);
  opt.iterations = 3;
  EXPECT_EQ(encode_gmm(train_ubm(std::span(&g, 1), opt)), encode_gmm(train_ubm(std::span(&g, 1), opt)));
}

TEST(AccumulateStats, MatchesLoopOracle) {
  GmmModel g = random_gmm(5, 3, 21);
  FeatureMatrix f = as_features(random_matrix(40, 3, 22));
  SufficientStats s = accumulate_stats(f, g);
  Eigen::MatrixXd post = loop_posteriors(f.frames, g);
  EXPECT_NEAR(s.n.sum(), 40.0, 1e-6);
  EXPECT_LE((s.n - post.colwise().sum().transpose()).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LE((s.f - post.transpose() * f.frames).cwiseAbs().maxCoeff(), 1e-10);

  FeatureMatrix one = as_features(f.frames.topRows(1));
  SufficientStats s1 = accumulate_stats(one, g);
  for (Eigen::Index c = 0; c < 5; ++c)
    EXPECT_LE((s1.f.row(c) - s1.n(c) * one.frames.row(0)).cwiseAbs().maxCoeff(), 1e-12);
  FeatureMatrix wrong = as_features(random_matrix(4, 2, 1));
  expect_error(ErrorKind::kInvalidArgument, [&] { accumulate_stats(wrong, g); });
}

TEST(AccumulateStats, AffineConsistency) {
  GmmModel g = random_gmm(4, 3, 5);
  FeatureMatrix f = as_features(random_matrix(30, 3, 6));
  const double a = 2.5;
  GmmModel gs = g;
  gs.means *= a;
  gs.variances *= a * a;
  FeatureMatrix fs = f;
  fs.frames *= a;
  SufficientStats s = accumulate_stats(f, g), ss = accumulate_stats(fs, gs);
  EXPECT_LE((s.n - ss.n).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(GmmModel, RoundTrip) {
  GmmModel g = random_gmm(3, 2, 1);
  std::string bytes = encode_gmm(g);
  GmmModel back = decode_gmm(bytes);
  EXPECT_EQ(back.weights, g.weights);
  EXPECT_EQ(back.means, g.means);
  EXPECT_EQ(back.variances, g.variances);
  EXPECT_EQ(encode_gmm(back), bytes);
  expect_error(ErrorKind::kIo, [&] { decode_gmm("EVTM" + bytes.substr(4)); });
}

SufficientStats random_stats(const GmmModel &g, int frames, std::uint64_t seed) {
  Eigen::MatrixXd x = random_matrix(frames, g.dim(), seed);
  x.array() += 0.3 * static_cast<double>(seed % 5);  // shift utterances apart
  return accumulate_stats(as_features(x), g);
}

TEST(IVector, ZeroCenteredStatsGiveZero) {
  TMatrixModel m;
  m.ubm = random_gmm(3, 2, 1);
  m.T = random_matrix(6, 4, 2);
  SufficientStats s;
  s.n = Eigen::Vector3d(2.0, 5.0, 1.0);
  s.f = s.n.asDiagonal() * m.ubm.means;
  Eigen::VectorXd w = extract_ivector(s, m);
  EXPECT_EQ(w.size(), 4);
  EXPECT_LE(w.cwiseAbs().maxCoeff(), 1e-14);
}

TEST(IVector, ScalarClosedForm) {
  TMatrixModel m;
  m.ubm.weights = Eigen::VectorXd::Ones(1);
  m.ubm.means = Eigen::MatrixXd::Constant(1, 1, 0.7);
  m.ubm.variances = Eigen::MatrixXd::Constant(1, 1, 2.5);
  m.T = Eigen::MatrixXd::Constant(1, 1, 1.3);
  SufficientStats s;
  s.n = Eigen::VectorXd::Constant(1, 12.0);
  s.f = Eigen::MatrixXd::Constant(1, 1, 20.0);
  const double t = 1.3, sig = 2.5, n = 12.0, ft = 20.0 - 12.0 * 0.7;
  double expected = t * ft / sig / (1.0 + t * t * n / sig);
  EXPECT_NEAR(extract_ivector(s, m)(0), expected, 1e-10);
}

TEST(IVector, MatchesDirectPosteriorMaximization) {
  TMatrixModel m;
  m.ubm = random_gmm(2, 2, 31);
  m.T = random_matrix(4, 2, 32);
  SufficientStats s = random_stats(m.ubm, 25, 33);
  // log posterior: w'T'S^-1 f~ - (w'w + sum_c n_c |S_c^-1/2 T_c w|^2) / 2,
  // maximized by plain gradient ascent.
  Eigen::Vector2d w = Eigen::Vector2d::Zero();
  for (int it = 0; it < 20000; ++it) {
    Eigen::Vector2d grad = -w;
    for (int c = 0; c < 2; ++c)
      for (int f = 0; f < 2; ++f) {
        Eigen::RowVector2d row = m.T.row(c * 2 + f);
        double ftil = s.f(c, f) - s.n(c) * m.ubm.means(c, f);
        grad += row.transpose() * (ftil - s.n(c) * row.dot(w)) / m.ubm.variances(c, f);
      }
    w += 0.01 * grad;
  }
  Eigen::VectorXd got = extract_ivector(s, m);
  EXPECT_LE((got - w).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(TrainTMatrix, ObjectiveMonotoneAndDeterministic) {
  GmmModel g = random_gmm(4, 3, 41);
  std::vector<SufficientStats> stats;
  for (int u = 0; u < 50; ++u) stats.push_back(random_stats(g, 60, 100 + u));
  TMatrixOptions opt;
  opt.ivector_dim = 5;
  opt.iterations = 5;
  std::vector<double> trace;
  TMatrixModel a = train_tmatrix(stats, g, opt, &trace);
  ASSERT_EQ(trace.size(), 6u);
  expect_non_decreasing(trace, 1e-9);
  EXPECT_GT(trace.back(), trace.front());
  TMatrixModel b = train_tmatrix(stats, g, opt);
  EXPECT_EQ(encode_tmatrix(a), encode_tmatrix(b));
  TMatrixModel back = decode_tmatrix(encode_tmatrix(a));
  EXPECT_EQ(back.T, a.T);
  EXPECT_EQ(back.ubm.means, g.means);
  IVectorExtractor ext(a);
  for (int u = 0; u < 3; ++u) EXPECT_TRUE(ext.extract(stats[u]).allFinite());
}

TEST(TrainTMatrix, Preconditions) {
  GmmModel g = random_gmm(2, 2, 1);
  std::vector<SufficientStats> stats;
  for (int u = 0; u < 2; ++u) stats.push_back(random_stats(g, 10, u));
  TMatrixOptions opt;
  opt.ivector_dim = 3;
  expect_error(ErrorKind::kInvalidArgument, [&] { train_tmatrix(stats, g, opt); }, "fewer utterances");
  opt.ivector_dim = 4;  // not < C*F
  expect_error(ErrorKind::kInvalidArgument, [&] { train_tmatrix(stats, g, opt); });
}

}  // namespace
}  // namespace evec
