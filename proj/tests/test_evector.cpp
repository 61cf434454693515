// tests/test_evector.cpp

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
#include <random>
#include <vector>

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include "evec/augment.hpp"
#include "evec/lda.hpp"
#include "evec/plda.hpp"
#include "test_util.hpp"

namespace evec {
namespace {

struct Labeled {
  Eigen::MatrixXd x;
  std::vector<int> labels;
};

// R rooms of n vectors each: room offsets with scale `between`, isotropic
// noise with scale `within`.
Labeled make_rooms(int R, int n, int dim, double between, double within, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  Labeled d;
  d.x.resize(R * n, dim);
  for (int r = 0; r < R; ++r) {
    Eigen::VectorXd m(dim);
    for (int k = 0; k < dim; ++k) m(k) = between * g(rng) * (1.0 + k);
    for (int i = 0; i < n; ++i) {
      for (int k = 0; k < dim; ++k) d.x(r * n + i, k) = m(k) + within * g(rng);
      d.labels.push_back(r);
    }
  }
  return d;
}

TEST(Scatter, MatchesDoubleLoopOracle) {
  Labeled d = make_rooms(3, 4, 5, 1.0, 0.5, 1);
  d.labels.push_back(2);  // uneven room sizes
  d.x.conservativeResize(13, 5);
  d.x.row(12) = random_matrix(1, 5, 9);
  ScatterPair s = compute_scatter(d.x, d.labels);

  const int R = 3;
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(5);
  for (int i = 0; i < 13; ++i) mean += d.x.row(i).transpose();
  mean /= 13.0;
  Eigen::MatrixXd sb = Eigen::MatrixXd::Zero(5, 5), sw = Eigen::MatrixXd::Zero(5, 5);
  for (int r = 0; r < R; ++r) {
    Eigen::VectorXd mr = Eigen::VectorXd::Zero(5);
    int nr = 0;
    for (int i = 0; i < 13; ++i)
      if (d.labels[i] == r) mr += d.x.row(i).transpose(), ++nr;
    mr /= nr;
    sb += (mr - mean) * (mr - mean).transpose() / R;
    for (int i = 0; i < 13; ++i)
      if (d.labels[i] == r) {
        Eigen::VectorXd e = d.x.row(i).transpose() - mr;
        sw += e * e.transpose() / (static_cast<double>(R) * nr);
      }
  }
  EXPECT_LE((s.between - sb).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE((s.within - sw).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE((s.between - s.between.transpose()).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_GE(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(s.within).eigenvalues().minCoeff(), -1e-12);
  EXPECT_EQ(s.counts, (std::vector<int>{4, 4, 5}));
}

TEST(Scatter, DegenerateCases) {
  Eigen::MatrixXd same = Eigen::MatrixXd::Ones(6, 3);
  std::vector<int> lab{0, 0, 1, 1, 2, 2};
  ScatterPair s = compute_scatter(same, lab);
  EXPECT_TRUE(s.between.isZero(1e-15));
  EXPECT_TRUE(s.within.isZero(1e-15));

  // Two single-point rooms: S_b is the outer product of half the difference.
  Eigen::MatrixXd two(2, 2);
  two << 1.0, 2.0, 3.0, -2.0;
  std::vector<int> l2{0, 1};
  ScatterPair t = compute_scatter(two, l2, true);
  Eigen::Vector2d h = 0.5 * (two.row(0) - two.row(1)).transpose();
  EXPECT_LE((t.between - h * h.transpose()).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_TRUE(t.within.isZero(0.0));
  expect_error(ErrorKind::kInvalidArgument, [&] { compute_scatter(two, l2); }, "single vector");
  std::vector<int> one{0, 0};
  expect_error(ErrorKind::kInvalidArgument, [&] { compute_scatter(two, one); }, "two rooms");
}

TEST(Lda, TwoClassAxis) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 0.3);
  Labeled d;
  d.x.resize(400, 2);
  // The second class mirrors the first across the y axis, so the pooled
  // within-class cross term cancels exactly.
  for (int i = 0; i < 200; ++i) {
    d.x(i, 0) = 1.0 + g(rng);
    d.x(i, 1) = g(rng);
    d.x(i + 200, 0) = -d.x(i, 0);
    d.x(i + 200, 1) = d.x(i, 1);
  }
  for (int i = 0; i < 400; ++i) d.labels.push_back(i < 200 ? 0 : 1);
  ScatterPair s = compute_scatter(d.x, d.labels);
  LdaModel m = train_lda(s, 1);
  EXPECT_GE(std::abs(m.projection(0, 0)), 0.999);
  // Class means project to opposite signs, far apart.
  Eigen::VectorXd a = project(Eigen::Vector2d(1.0, 0.0), m), b = project(Eigen::Vector2d(-1.0, 0.0), m);
  EXPECT_LT(a(0) * b(0), 0.0);
  EXPECT_NEAR(std::abs(a(0) - b(0)), 2.0, 0.1);
}

TEST(Lda, TopEigenvaluesMatchDenseOracle) {
  Labeled d = make_rooms(15, 6, 10, 1.0, 0.7, 5);
  ScatterPair s = compute_scatter(d.x, d.labels);
  LdaModel m = train_lda(s, 6);
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> oracle(s.between, stabilized_within(s));
  Eigen::VectorXd ev = oracle.eigenvalues().reverse();
  for (int k = 0; k < 6; ++k) {
    EXPECT_NEAR(m.eigenvalues(k), ev(k), 1e-9 * ev(0)) << k;
    Eigen::VectorXd ov = oracle.eigenvectors().col(9 - k).normalized();
    EXPECT_GE(std::abs(ov.dot(m.projection.col(k))), 1.0 - 1e-8) << k;
    EXPECT_NEAR(m.projection.col(k).norm(), 1.0, 1e-12);
  }
  Eigen::VectorXd res = lda_residuals(s, m);
  EXPECT_LE(res.maxCoeff(), 1e-6);
  // Mean projects to zero, and the map is affine.
  EXPECT_LE(project(s.global_mean, m).cwiseAbs().maxCoeff(), 1e-12);
  Eigen::VectorXd x = random_matrix(10, 1, 1), y = random_matrix(10, 1, 2);
  const double a = 0.7, b = -1.9;
  Eigen::VectorXd lhs = project(Eigen::VectorXd(a * x + b * y), m);
  Eigen::VectorXd rhs = a * project(x, m) + b * project(y, m) +
                        (a + b - 1.0) * m.projection.transpose() * m.mean;
  EXPECT_LE((lhs - rhs).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Lda, RankBoundAndErrors) {
  Labeled d = make_rooms(3, 5, 6, 1.0, 0.5, 7);
  ScatterPair s = compute_scatter(d.x, d.labels);
  LdaModel m = train_lda(s, 2);
  EXPECT_EQ(m.dim(), 2);
  EXPECT_GT(m.eigenvalues(1), 0.0);
  expect_error(ErrorKind::kInvalidArgument, [&] { train_lda(s, 3); });
  expect_error(ErrorKind::kInvalidArgument, [&] { train_lda(s, 0); });
  EXPECT_EQ(m.truncated(1).projection, m.projection.leftCols(1));
  LdaModel back = decode_lda(encode_lda(m));
  EXPECT_EQ(back.projection, m.projection);
  EXPECT_EQ(back.mean, m.mean);
  expect_error(ErrorKind::kInvalidArgument, [&] { project(Eigen::VectorXd::Zero(5), m); });
}

TEST(Lda, SignConventionIsDeterministic) {
  Labeled d = make_rooms(8, 4, 5, 1.0, 0.5, 8);
  LdaModel m = train_lda(compute_scatter(d.x, d.labels), 4);
  for (int k = 0; k < 4; ++k) {
    Eigen::Index arg;
    m.projection.col(k).cwiseAbs().maxCoeff(&arg);
    EXPECT_GT(m.projection(arg, k), 0.0);
  }
}

TEST(Lda, ConstantAugmentationIsInert) {
  Labeled d = make_rooms(12, 5, 6, 1.0, 0.6, 9);
  Eigen::MatrixXd aug(d.x.rows(), 8);
  aug.leftCols(6) = d.x;
  aug.rightCols(2).setConstant(0.0);
  LdaModel plain = train_lda(compute_scatter(d.x, d.labels), 4);
  LdaModel wide = train_lda(compute_scatter(aug, d.labels), 4);
  for (int k = 0; k < 4; ++k) {
    EXPECT_LE(wide.projection.col(k).tail(2).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_GE(std::abs(wide.projection.col(k).head(6).normalized().dot(plain.projection.col(k))), 1 - 1e-8);
  }
}

Labeled two_covariance_sample(const Eigen::MatrixXd &B, const Eigen::MatrixXd &W, int R, int n,
                              std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  const Eigen::Index d = B.rows();
  Eigen::MatrixXd lb = Eigen::LLT<Eigen::MatrixXd>(B).matrixL();
  Eigen::MatrixXd lw = Eigen::LLT<Eigen::MatrixXd>(W).matrixL();
  Labeled out;
  out.x.resize(R * n, d);
  auto draw = [&] {
    Eigen::VectorXd z(d);
    for (Eigen::Index k = 0; k < d; ++k) z(k) = g(rng);
    return z;
  };
  for (int r = 0; r < R; ++r) {
    Eigen::VectorXd y = lb * draw();
    for (int i = 0; i < n; ++i) {
      out.x.row(r * n + i) = (y + lw * draw()).transpose();
      out.labels.push_back(r);
    }
  }
  return out;
}

TEST(Plda, RecoversKnownCovariances) {
  const int d = 5;
  Eigen::MatrixXd A = random_matrix(d, d, 11), Bm = random_matrix(d, d, 12);
  Eigen::MatrixXd B = A * A.transpose() / d + 0.5 * Eigen::MatrixXd::Identity(d, d);
  Eigen::MatrixXd W = Bm * Bm.transpose() / d + 0.2 * Eigen::MatrixXd::Identity(d, d);
  Labeled s = two_covariance_sample(B, W, 200, 10, 13);
  PldaModel m = train_plda(s.x, s.labels);
  EXPECT_LE((m.between - B).norm() / B.norm(), 0.15);
  EXPECT_LE((m.within - W).norm() / W.norm(), 0.15);
  EXPECT_LE((m.mu - s.x.colwise().mean().transpose()).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Plda, NoBetweenVarianceClipsToNearZero) {
  Labeled s = make_rooms(50, 8, 4, 0.0, 1.0, 14);
  PldaModel m = train_plda(s.x, s.labels);
  EXPECT_LE(m.between.norm() / m.within.norm(), 0.1);
  EXPECT_GE(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(m.between).eigenvalues().minCoeff(), 0.0);
}

TEST(Plda, ScoreSymmetryTranslationAndSeparation) {
  const int d = 4;
  Eigen::MatrixXd B = 4.0 * Eigen::MatrixXd::Identity(d, d), W = 0.25 * Eigen::MatrixXd::Identity(d, d);
  Labeled s = two_covariance_sample(B, W, 100, 6, 15);
  PldaModel m = train_plda(s.x, s.labels);
  PldaScorer scorer(m);
  Eigen::VectorXd a = s.x.row(0), b = s.x.row(17);
  EXPECT_NEAR(scorer.score(a, b), scorer.score(b, a), 1e-9);
  PldaModel shifted = m;
  Eigen::VectorXd t = Eigen::VectorXd::Constant(d, 3.3);
  shifted.mu += t;
  EXPECT_NEAR(PldaScorer(shifted).score(a + t, b + t), scorer.score(a, b), 1e-9);

  std::vector<double> same, diff;
  for (int r = 0; r < 100; ++r)
    for (int q = 0; q < 100; q += 7) {
      double v = scorer.score(s.x.row(r * 6), s.x.row(q * 6 + 1));
      (r == q ? same : diff).push_back(v);
    }
  auto stats = [](const std::vector<double> &v) {
    double m = 0, s2 = 0;
    for (double x : v) m += x;
    m /= v.size();
    for (double x : v) s2 += (x - m) * (x - m);
    return std::pair{m, std::sqrt(s2 / v.size())};
  };
  auto [ms, ss] = stats(same);
  auto [md, sd] = stats(diff);
  // Different-room LLRs spread widely on separable data; the yardstick is the
  // spread of the same-room scores.
  EXPECT_GE(ms - md, 3.0 * ss);
  EXPECT_GT(sd, 0.0);
}

TEST(Plda, DegenerateModelScoresZero) {
  PldaModel m;
  m.mu = Eigen::VectorXd::Zero(3);
  m.between = Eigen::MatrixXd::Zero(3, 3);
  m.within = Eigen::MatrixXd::Identity(3, 3);
  PldaScorer s(m);
  EXPECT_NEAR(s.score(Eigen::Vector3d(1, 2, 3), Eigen::Vector3d(-1, 0, 4)), 0.0, 1e-12);
  m.within(0, 0) = -1.0;
  expect_error(ErrorKind::kNumerical, [&] { PldaScorer bad(m); });
}

TEST(Plda, RoundTripAndErrors) {
  Labeled s = make_rooms(5, 3, 3, 1.0, 0.5, 16);
  PldaModel m = train_plda(s.x, s.labels);
  PldaModel back = decode_plda(encode_plda(m));
  EXPECT_EQ(back.between, m.between);
  EXPECT_EQ(back.within, m.within);
  EXPECT_EQ(plda_score(s.x.row(0), s.x.row(1), back), plda_score(s.x.row(0), s.x.row(1), m));
  expect_error(ErrorKind::kInvalidArgument, [&] { plda_score(Eigen::VectorXd::Zero(2), s.x.row(1), m); });
  std::vector<int> single{0, 0, 1, 1, 1, 2, 3, 3, 4, 4, 4, 4, 4, 4, 4};
  expect_error(ErrorKind::kInvalidArgument, [&] { train_plda(s.x, single); });
}

TEST(Augment, ShapesAndNormalization) {
  std::vector<double> snr{5, 10, 15, 20, 25}, t60{0.1, 0.2, 0.2, 0.3, 0.45};
  MetadataNormalizer norm{ZScore::fit(snr), ZScore::fit(t60)};
  double zm = 0, zv = 0;
  for (double v : snr) zm += norm.snr(v);
  for (double v : snr) zv += norm.snr(v) * norm.snr(v);
  EXPECT_NEAR(zm / 5, 0.0, 1e-12);
  EXPECT_NEAR(zv / 5, 1.0, 1e-12);

  Eigen::VectorXd iv = Eigen::VectorXd::LinSpaced(7, 0.0, 1.0);
  EXPECT_EQ(augment(iv, 10, 0.2, norm, AugmentVariant::kSnrT60).size(), 9);
  EXPECT_EQ(augment(iv, 10, 0.2, norm, AugmentVariant::kSnr).size(), 8);
  EXPECT_EQ(augment(iv, 10, 0.2, norm, AugmentVariant::kT60).size(), 8);
  EXPECT_EQ(augment(iv, 10, 0.2, std::nullopt, AugmentVariant::kNone), iv);
  Eigen::VectorXd a = augment(iv, 10, 0.2, norm, AugmentVariant::kSnrT60);
  EXPECT_EQ(a(7), norm.snr(10));
  EXPECT_EQ(a(8), norm.t60(0.2));
  expect_error(ErrorKind::kInvalidArgument, [&] { augment(iv, 1, 1, std::nullopt, AugmentVariant::kSnr); });
  EXPECT_EQ(ZScore::fit(std::vector<double>{2.0, 2.0}).scale, 1.0);
  for (AugmentVariant v : kAllAugmentVariants) EXPECT_EQ(parse_augment_variant(to_string(v)), v);
}

}  // namespace
}  // namespace evec
