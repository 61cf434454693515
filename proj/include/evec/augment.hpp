// evec/augment.hpp

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

// Appending z-normalized metadata estimates (SNR, T60) to i-vectors.

#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <span>
#include <string>

#include <Eigen/Dense>

#include "evec/common.hpp"

namespace evec {

enum class AugmentVariant { kNone, kSnr, kT60, kSnrT60 };

inline constexpr std::array<AugmentVariant, 4> kAllAugmentVariants{
    AugmentVariant::kNone, AugmentVariant::kSnr, AugmentVariant::kT60, AugmentVariant::kSnrT60};

inline std::string to_string(AugmentVariant v) {
  switch (v) {
    case AugmentVariant::kNone: return "none";
    case AugmentVariant::kSnr: return "snr";
    case AugmentVariant::kT60: return "t60";
    case AugmentVariant::kSnrT60: return "snr_t60";
  }
  return "?";
}

inline AugmentVariant parse_augment_variant(const std::string &s) {
  for (AugmentVariant v : kAllAugmentVariants)
    if (to_string(v) == s) return v;
  fail(ErrorKind::kInvalidArgument, "unknown augmentation variant: " + s);
}

inline int extra_dims(AugmentVariant v) {
  return v == AugmentVariant::kNone ? 0 : v == AugmentVariant::kSnrT60 ? 2 : 1;
}

struct ZScore {
  double mean = 0.0;
  double scale = 1.0;  // standard deviation; 1 when the field is constant

  double operator()(double x) const { return (x - mean) / scale; }

  static ZScore fit(std::span<const double> xs) {
    require(!xs.empty(), "zscore: no values");
    ZScore z;
    for (double x : xs) z.mean += x;
    z.mean /= static_cast<double>(xs.size());
    double var = 0.0;
    for (double x : xs) var += (x - z.mean) * (x - z.mean);
    var /= static_cast<double>(xs.size());
    z.scale = var > 0.0 ? std::sqrt(var) : 1.0;
    return z;
  }
};

/// Per-field normalization statistics, fitted on the training split only.
struct MetadataNormalizer {
  ZScore snr;
  ZScore t60;
};

/// [i; z(snr); z(t60)] with the fields selected by `variant`.
inline Eigen::VectorXd augment(const Eigen::VectorXd &ivector, double snr_est, double t60_est,
                               const std::optional<MetadataNormalizer> &norm,
                               AugmentVariant variant) {
  if (variant == AugmentVariant::kNone) return ivector;
  if (!norm) fail(ErrorKind::kInvalidArgument, "augment: missing normalization statistics");
  Eigen::VectorXd out(ivector.size() + extra_dims(variant));
  out.head(ivector.size()) = ivector;
  Eigen::Index k = ivector.size();
  if (variant == AugmentVariant::kSnr || variant == AugmentVariant::kSnrT60)
    out(k++) = norm->snr(snr_est);
  if (variant == AugmentVariant::kT60 || variant == AugmentVariant::kSnrT60)
    out(k++) = norm->t60(t60_est);
  return out;
}

}  // namespace evec
