// evec/bottleneck.hpp

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

// Bottleneck regressor M x 20 x 5 x 20 x 1: ReLU on the three hidden layers,
// identity output. Trained on squared error with Adam and early stopping on
// validation MAE.

#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "evec/common.hpp"
#include "evec/ridge.hpp"
#include "evec/serialize.hpp"

namespace evec {

inline constexpr std::array<int, 3> kBottleneckHidden{20, 5, 20};
inline constexpr int kBottleneckLayers = 4;

struct BottleneckNet {
  std::array<Eigen::MatrixXd, kBottleneckLayers> weights;  // out x in
  std::array<Eigen::VectorXd, kBottleneckLayers> biases;
  Eigen::VectorXd input_mean;   // z-normalization fitted on training inputs
  Eigen::VectorXd input_scale;
  TargetKind target = TargetKind::kSnrDb;

  Eigen::Index input_dim() const { return weights[0].cols(); }

  /// Architecture with all parameters zero and identity input normalization.
  static BottleneckNet zeros(Eigen::Index input_dim) {
    BottleneckNet n;
    std::array<Eigen::Index, 5> sizes{input_dim, kBottleneckHidden[0], kBottleneckHidden[1],
                                      kBottleneckHidden[2], 1};
    for (int l = 0; l < kBottleneckLayers; ++l) {
      n.weights[l] = Eigen::MatrixXd::Zero(sizes[l + 1], sizes[l]);
      n.biases[l] = Eigen::VectorXd::Zero(sizes[l + 1]);
    }
    n.input_mean = Eigen::VectorXd::Zero(input_dim);
    n.input_scale = Eigen::VectorXd::Ones(input_dim);
    return n;
  }

  Eigen::MatrixXd normalize(const Eigen::MatrixXd &x) const {  // rows are samples
    return ((x.rowwise() - input_mean.transpose()).array().rowwise() /
            input_scale.transpose().array())
        .matrix();
  }
};

struct NetGradient {
  std::array<Eigen::MatrixXd, kBottleneckLayers> weights;
  std::array<Eigen::VectorXd, kBottleneckLayers> biases;
};

/// Outputs for normalized inputs z (columns are samples).
inline Eigen::RowVectorXd bottleneck_forward(const BottleneckNet &net, const Eigen::MatrixXd &z) {
  Eigen::MatrixXd a = z;
  for (int l = 0; l < kBottleneckLayers; ++l) {
    Eigen::MatrixXd pre = (net.weights[l] * a).colwise() + net.biases[l];
    a = l + 1 < kBottleneckLayers ? pre.cwiseMax(0.0) : pre;
  }
  return a.row(0);
}

/// Mean squared error over the columns of z and its gradient by backprop.
inline double bottleneck_loss(const BottleneckNet &net, const Eigen::MatrixXd &z,
                              const Eigen::VectorXd &y, NetGradient *grad) {
  const Eigen::Index B = z.cols();
  std::array<Eigen::MatrixXd, kBottleneckLayers + 1> act;
  std::array<Eigen::MatrixXd, kBottleneckLayers> pre;
  act[0] = z;
  for (int l = 0; l < kBottleneckLayers; ++l) {
    pre[l] = (net.weights[l] * act[l]).colwise() + net.biases[l];
    act[l + 1] = l + 1 < kBottleneckLayers ? pre[l].cwiseMax(0.0) : pre[l];
  }
  Eigen::RowVectorXd err = act[kBottleneckLayers].row(0) - y.transpose();
  const double loss = err.squaredNorm() / static_cast<double>(B);
  if (!grad) return loss;

  Eigen::MatrixXd delta = (2.0 / static_cast<double>(B)) * err;  // dL/d pre of the output
  for (int l = kBottleneckLayers - 1; l >= 0; --l) {
    grad->weights[l] = delta * act[l].transpose();
    grad->biases[l] = delta.rowwise().sum();
    if (l > 0) {
      delta = net.weights[l].transpose() * delta;
      delta.array() *= (pre[l - 1].array() > 0.0).cast<double>();
    }
  }
  return loss;
}

inline Eigen::VectorXd flatten_parameters(const std::array<Eigen::MatrixXd, kBottleneckLayers> &w,
                                          const std::array<Eigen::VectorXd, kBottleneckLayers> &b) {
  Eigen::Index n = 0;
  for (int l = 0; l < kBottleneckLayers; ++l) n += w[l].size() + b[l].size();
  Eigen::VectorXd out(n);
  Eigen::Index k = 0;
  for (int l = 0; l < kBottleneckLayers; ++l) {
    out.segment(k, w[l].size()) = Eigen::Map<const Eigen::VectorXd>(w[l].data(), w[l].size());
    k += w[l].size();
    out.segment(k, b[l].size()) = b[l];
    k += b[l].size();
  }
  return out;
}

inline void unflatten_parameters(const Eigen::VectorXd &p, BottleneckNet &net) {
  Eigen::Index k = 0;
  for (int l = 0; l < kBottleneckLayers; ++l) {
    Eigen::Map<Eigen::VectorXd>(net.weights[l].data(), net.weights[l].size()) =
        p.segment(k, net.weights[l].size());
    k += net.weights[l].size();
    net.biases[l] = p.segment(k, net.biases[l].size());
    k += net.biases[l].size();
  }
}

struct BottleneckHyper {
  int max_epochs = 2000;
  int batch = 32;
  double step_size = 1e-3;
  int patience = 20;
  std::uint64_t seed = 1;
};

/// Rows of x / x_val are raw (unnormalized) input vectors. Returns the
/// parameters with the best validation MAE seen. `val_trace`, when given,
/// receives the validation MAE after every epoch.
inline BottleneckNet train_bottleneck(const Eigen::MatrixXd &x, const Eigen::VectorXd &y,
                                      const Eigen::MatrixXd &x_val, const Eigen::VectorXd &y_val,
                                      TargetKind target, const BottleneckHyper &hp,
                                      std::vector<double> *val_trace = nullptr) {
  require(x.rows() == y.size() && x.rows() > 0, "train_bottleneck: bad training set");
  if (x_val.rows() == 0) fail(ErrorKind::kInvalidArgument, "train_bottleneck: empty validation set");
  require(x_val.cols() == x.cols() && x_val.rows() == y_val.size(),
          "train_bottleneck: bad validation set");
  require(hp.batch >= 1 && hp.max_epochs >= 1 && hp.step_size > 0.0, "train_bottleneck: bad hyperparameters");
  const Eigen::Index M = x.cols(), N = x.rows();

  BottleneckNet net = BottleneckNet::zeros(M);
  net.target = target;
  net.input_mean = x.colwise().mean().transpose();
  net.input_scale = ((x.rowwise() - net.input_mean.transpose()).array().square().colwise().mean())
                        .sqrt()
                        .transpose()
                        .matrix();
  for (Eigen::Index i = 0; i < M; ++i)
    if (!(net.input_scale(i) > 1e-12)) net.input_scale(i) = 1.0;

  std::mt19937_64 rng(derive_seed(hp.seed, 0x626e6e));
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int l = 0; l < kBottleneckLayers; ++l) {
    const double sd = std::sqrt(2.0 / static_cast<double>(net.weights[l].cols()));
    for (Eigen::Index i = 0; i < net.weights[l].size(); ++i) net.weights[l].data()[i] = sd * gauss(rng);
  }
  net.biases[kBottleneckLayers - 1](0) = y.mean();

  const Eigen::MatrixXd z = net.normalize(x).transpose();  // M x N
  const Eigen::MatrixXd z_val = net.normalize(x_val).transpose();

  Eigen::VectorXd params = flatten_parameters(net.weights, net.biases);
  Eigen::VectorXd m1 = Eigen::VectorXd::Zero(params.size()), m2 = m1;
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  long step = 0;

  BottleneckNet best = net;
  double best_mae = std::numeric_limits<double>::infinity();
  int since_best = 0;
  std::vector<Eigen::Index> order(N);
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  NetGradient grad;
  for (int epoch = 0; epoch < hp.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (Eigen::Index start = 0; start < N; start += hp.batch) {
      const Eigen::Index B = std::min<Eigen::Index>(hp.batch, N - start);
      Eigen::MatrixXd zb(M, B);
      Eigen::VectorXd yb(B);
      for (Eigen::Index k = 0; k < B; ++k) {
        zb.col(k) = z.col(order[start + k]);
        yb(k) = y(order[start + k]);
      }
      double loss = bottleneck_loss(net, zb, yb, &grad);
      if (!std::isfinite(loss))
        fail(ErrorKind::kNumerical, "train_bottleneck: loss diverged (step size too large?)");
      Eigen::VectorXd g = flatten_parameters(grad.weights, grad.biases);
      ++step;
      m1 = kBeta1 * m1 + (1.0 - kBeta1) * g;
      m2 = kBeta2 * m2 + (1.0 - kBeta2) * g.cwiseAbs2();
      const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(step));
      params.array() -= hp.step_size * (m1.array() / c1) / ((m2.array() / c2).sqrt() + kEps);
      unflatten_parameters(params, net);
    }
    double mae = (bottleneck_forward(net, z_val).transpose() - y_val).cwiseAbs().mean();
    if (!std::isfinite(mae)) fail(ErrorKind::kNumerical, "train_bottleneck: validation error diverged");
    if (val_trace) val_trace->push_back(mae);
    if (mae < best_mae) {
      best_mae = mae;
      best = net;
      since_best = 0;
    } else if (++since_best >= hp.patience) {
      break;
    }
  }
  return best;
}

inline double predict_bottleneck(const BottleneckNet &net, const Eigen::VectorXd &x) {
  if (x.size() != net.input_dim())
    fail(ErrorKind::kInvalidArgument, "predict_bottleneck: dimension mismatch");
  Eigen::MatrixXd z = ((x - net.input_mean).array() / net.input_scale.array()).matrix();
  return bottleneck_forward(net, z)(0);
}

inline Eigen::VectorXd predict_bottleneck(const BottleneckNet &net, const Eigen::MatrixXd &x) {
  if (x.cols() != net.input_dim())
    fail(ErrorKind::kInvalidArgument, "predict_bottleneck: dimension mismatch");
  return bottleneck_forward(net, net.normalize(x).transpose()).transpose();
}

// "EVBN", u32 version, u32 M, u32 target, input_mean[M], input_scale[M],
// then per layer W[out][in] and b[out].
inline std::string encode_bottleneck(const BottleneckNet &n) {
  BinaryWriter w;
  w.magic("EVBN", 1);
  w.u32(static_cast<std::uint32_t>(n.input_dim()));
  w.u32(n.target == TargetKind::kSnrDb ? 0 : 1);
  w.vec(n.input_mean);
  w.vec(n.input_scale);
  for (int l = 0; l < kBottleneckLayers; ++l) {
    w.mat(n.weights[l]);
    w.vec(n.biases[l]);
  }
  return w.bytes();
}

inline BottleneckNet decode_bottleneck(std::string bytes) {
  BinaryReader r(std::move(bytes));
  if (r.magic("EVBN") != 1) fail(ErrorKind::kIo, "bottleneck model: unsupported version");
  std::uint32_t M = r.u32();
  BottleneckNet n = BottleneckNet::zeros(M);
  n.target = r.u32() == 0 ? TargetKind::kSnrDb : TargetKind::kT60S;
  n.input_mean = r.vec(M);
  n.input_scale = r.vec(M);
  for (int l = 0; l < kBottleneckLayers; ++l) {
    n.weights[l] = r.mat(n.weights[l].rows(), n.weights[l].cols());
    n.biases[l] = r.vec(n.biases[l].size());
  }
  return n;
}

}  // namespace evec
