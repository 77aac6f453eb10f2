// Copyright 2026 The clipforensics Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Quadratic-time reference implementations. They share nothing with the
// library code and follow the textbook definitions literally.

#include <algorithm>
#include <functional>
#include <set>
#include <vector>

#include "metrics/metrics.hpp"

namespace oracle {

inline double pairwise_auc(const cfx::metrics::LabeledScores& s) {
  double wins = 0;
  double pairs = 0;
  for (const auto& p : s) {
    if (!p.fake) continue;
    for (const auto& n : s) {
      if (n.fake) continue;
      pairs += 1;
      if (p.score > n.score) wins += 1;
      else if (p.score == n.score) wins += 0.5;
    }
  }
  return wins / pairs;
}

// Walk every distinct score as a threshold (predict fake iff score >= t),
// from the highest down, summing recall increments times precision.
inline double enumerated_ap(const cfx::metrics::LabeledScores& s) {
  std::set<double, std::greater<>> thresholds;
  double n_pos = 0;
  for (const auto& x : s) {
    thresholds.insert(x.score);
    if (x.fake) n_pos += 1;
  }
  double ap = 0;
  double prev_recall = 0;
  for (double t : thresholds) {
    double tp = 0;
    double predicted = 0;
    for (const auto& x : s) {
      if (x.score >= t) {
        predicted += 1;
        if (x.fake) tp += 1;
      }
    }
    const double recall = tp / n_pos;
    ap += (recall - prev_recall) * (tp / predicted);
    prev_recall = recall;
  }
  return ap;
}

struct Counts {
  double accuracy, tpr, tnr;
};

inline Counts counted(const cfx::metrics::LabeledScores& s, double threshold) {
  int tp = 0, tn = 0, pos = 0, neg = 0;
  for (const auto& x : s) {
    const bool said_fake = x.score > threshold;
    if (x.fake) {
      ++pos;
      if (said_fake) ++tp;
    } else {
      ++neg;
      if (!said_fake) ++tn;
    }
  }
  return {static_cast<double>(tp + tn) / static_cast<double>(s.size()),
          pos ? static_cast<double>(tp) / pos : 0.0, neg ? static_cast<double>(tn) / neg : 0.0};
}

}  // namespace oracle
