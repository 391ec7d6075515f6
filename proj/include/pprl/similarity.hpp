// Copyright 2026 The pprl-train Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace pprl {

struct VectorRef {
  std::string client_id;
  std::size_t index = 0;

  friend auto operator<=>(const VectorRef&, const VectorRef&) = default;
};

struct ClassifiedPair {
  VectorRef left;
  VectorRef right;
  double similarity = 0.0;
  bool is_match = false;

  friend bool operator==(const ClassifiedPair&, const ClassifiedPair&) = default;
};

/// similarity >= threshold. Both arguments must lie in [0, 1].
bool classify(double similarity, double threshold);

struct ConfusionMatrix {
  std::uint64_t true_positives = 0;
  std::uint64_t false_positives = 0;
  std::uint64_t false_negatives = 0;
  std::uint64_t true_negatives = 0;

  std::uint64_t total() const {
    return true_positives + false_positives + false_negatives + true_negatives;
  }
  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

struct Metrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  // set when the corresponding denominator was zero and the value defaulted to 0
  bool precision_degenerate = false;
  bool recall_degenerate = false;

  bool degenerate() const { return precision_degenerate || recall_degenerate; }
};

Metrics metrics(const ConfusionMatrix& cm);

struct ScoredPair {
  double similarity = 0.0;
  bool is_true_match = false;
};

struct SweepRow {
  double threshold = 0.0;
  Metrics metrics;
  ConfusionMatrix counts;  // true_negatives left at 0 (not derivable here)
};

/// One metrics row per threshold over the given pairs. `unlisted_true_matches`
/// counts true matches absent from `pairs`; they are always false negatives.
std::vector<SweepRow> sweep(std::span<const ScoredPair> pairs,
                            std::span<const double> thresholds,
                            std::uint64_t unlisted_true_matches = 0);

/// 0.00, 0.01, ..., 1.00 computed as i/100 so that 0.70 is exact.
std::vector<double> percent_thresholds();

/// Header plus one "threshold,precision,recall,f1" line per row.
std::string sweep_csv(std::span<const SweepRow> rows);

/// Row with the largest F1; the lowest threshold wins ties.
const SweepRow& best_f1(std::span<const SweepRow> rows);

}  // namespace pprl
