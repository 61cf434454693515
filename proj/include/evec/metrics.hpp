// evec/metrics.hpp

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

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "evec/common.hpp"

namespace evec {

struct TrialScore {
  std::string enroll_room_id;
  std::string test_instance_id;
  double score = 0.0;
  bool is_target = false;
};

/// One operating point: trials with score >= threshold are accepted.
struct DetPoint {
  double threshold = 0.0;
  double false_accept = 0.0;  // fraction of non-targets accepted
  double false_reject = 0.0;  // fraction of targets rejected
};

/// Operating points for thresholds -inf, every unique score ascending, +inf.
inline std::vector<DetPoint> det_points(std::span<const TrialScore> trials) {
  std::size_t nt = 0, nn = 0;
  std::vector<std::pair<double, bool>> s;
  s.reserve(trials.size());
  for (const auto &t : trials) {
    if (!std::isfinite(t.score)) fail(ErrorKind::kInvalidArgument, "det_points: non-finite score");
    s.emplace_back(t.score, t.is_target);
    (t.is_target ? nt : nn) += 1;
  }
  if (nt == 0 || nn == 0)
    fail(ErrorKind::kInvalidArgument, "det_points: need both target and non-target trials");
  std::sort(s.begin(), s.end());

  std::vector<DetPoint> pts;
  pts.push_back({-INFINITY, 1.0, 0.0});
  std::size_t rejected_t = 0, rejected_n = 0;  // trials strictly below the threshold
  for (std::size_t i = 0; i < s.size();) {
    const double thr = s[i].first;
    pts.push_back({thr, static_cast<double>(nn - rejected_n) / nn, static_cast<double>(rejected_t) / nt});
    for (; i < s.size() && s[i].first == thr; ++i) (s[i].second ? rejected_t : rejected_n) += 1;
  }
  pts.push_back({INFINITY, 0.0, 1.0});
  return pts;
}

/// EER in percent. The false-reject minus false-accept difference is walked
/// along the DET points and linearly interpolated where it changes sign.
inline double compute_eer(std::span<const TrialScore> trials) {
  std::vector<DetPoint> pts = det_points(trials);
  for (std::size_t k = 1; k < pts.size(); ++k) {
    const double d1 = pts[k].false_reject - pts[k].false_accept;
    if (d1 < 0.0) continue;
    const double d0 = pts[k - 1].false_reject - pts[k - 1].false_accept;
    const double f = d1 == d0 ? 0.0 : -d0 / (d1 - d0);
    const double far = pts[k - 1].false_accept + f * (pts[k].false_accept - pts[k - 1].false_accept);
    return 100.0 * far;
  }
  return 100.0 * pts.back().false_accept;  // unreachable: the last point has FRR = 1, FAR = 0
}

inline double compute_mae(std::span<const double> predictions, std::span<const double> truths) {
  if (predictions.size() != truths.size()) fail(ErrorKind::kInvalidArgument, "compute_mae: length mismatch");
  if (predictions.empty()) fail(ErrorKind::kInvalidArgument, "compute_mae: empty input");
  double s = 0.0;
  for (std::size_t i = 0; i < truths.size(); ++i) s += std::fabs(predictions[i] - truths[i]);
  return s / static_cast<double>(truths.size());
}

}  // namespace evec
