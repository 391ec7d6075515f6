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

#include "pprl/similarity.hpp"

#include <algorithm>
#include <fmt/format.h>
#include <stdexcept>

namespace pprl {

namespace {

bool in_unit_interval(double x) { return x >= 0.0 && x <= 1.0; }

}  // namespace

bool classify(double similarity, double threshold) {
  if (!in_unit_interval(similarity)) {
    throw std::invalid_argument("similarity out of range");
  }
  if (!in_unit_interval(threshold)) {
    throw std::invalid_argument("threshold out of range");
  }
  return similarity >= threshold;
}

Metrics metrics(const ConfusionMatrix& cm) {
  Metrics m;
  const auto predicted = cm.true_positives + cm.false_positives;
  const auto actual = cm.true_positives + cm.false_negatives;
  if (predicted == 0) {
    m.precision_degenerate = true;
  } else {
    m.precision = static_cast<double>(cm.true_positives) /
                  static_cast<double>(predicted);
  }
  if (actual == 0) {
    m.recall_degenerate = true;
  } else {
    m.recall =
        static_cast<double>(cm.true_positives) / static_cast<double>(actual);
  }
  if (m.precision + m.recall > 0.0) {
    m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
  }
  return m;
}

std::vector<SweepRow> sweep(std::span<const ScoredPair> pairs,
                            std::span<const double> thresholds,
                            std::uint64_t unlisted_true_matches) {
  if (!std::is_sorted(thresholds.begin(), thresholds.end())) {
    throw std::invalid_argument("thresholds must be sorted ascending");
  }
  std::vector<double> true_scores;
  std::vector<double> false_scores;
  for (const auto& p : pairs) {
    (p.is_true_match ? true_scores : false_scores).push_back(p.similarity);
  }
  std::sort(true_scores.begin(), true_scores.end());
  std::sort(false_scores.begin(), false_scores.end());

  const auto at_or_above = [](const std::vector<double>& sorted, double t) {
    return static_cast<std::uint64_t>(
        sorted.end() - std::lower_bound(sorted.begin(), sorted.end(), t));
  };

  const std::uint64_t all_true = true_scores.size() + unlisted_true_matches;
  std::vector<SweepRow> rows;
  rows.reserve(thresholds.size());
  for (double t : thresholds) {
    SweepRow row;
    row.threshold = t;
    row.counts.true_positives = at_or_above(true_scores, t);
    row.counts.false_positives = at_or_above(false_scores, t);
    row.counts.false_negatives = all_true - row.counts.true_positives;
    row.metrics = metrics(row.counts);
    rows.push_back(row);
  }
  return rows;
}

std::vector<double> percent_thresholds() {
  std::vector<double> out;
  out.reserve(101);
  for (int i = 0; i <= 100; ++i) out.push_back(i / 100.0);
  return out;
}

std::string sweep_csv(std::span<const SweepRow> rows) {
  std::string out = "threshold,precision,recall,f1\n";
  for (const auto& row : rows) {
    out += fmt::format("{:.2f},{:.6f},{:.6f},{:.6f}\n", row.threshold,
                       row.metrics.precision, row.metrics.recall,
                       row.metrics.f1);
  }
  return out;
}

const SweepRow& best_f1(std::span<const SweepRow> rows) {
  if (rows.empty()) throw std::invalid_argument("empty sweep");
  const SweepRow* best = &rows.front();
  for (const auto& row : rows) {
    if (row.metrics.f1 > best->metrics.f1) best = &row;
  }
  return *best;
}

}  // namespace pprl
