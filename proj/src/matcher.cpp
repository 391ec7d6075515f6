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

#include "pprl/matcher.hpp"

#include <algorithm>
#include <bit>
#include <stdexcept>
#include <thread>

namespace pprl {

namespace {

std::size_t common_length(std::span<const BitVector> a,
                          std::span<const BitVector> b) {
  std::size_t length = 0;
  bool first = true;
  for (auto list : {a, b}) {
    for (const auto& v : list) {
      if (first) {
        length = v.size();
        first = false;
      } else if (v.size() != length) {
        throw std::invalid_argument("match task mixes vector lengths");
      }
    }
  }
  return length;
}

inline double word_jaccard(const std::uint64_t* x, const std::uint64_t* y,
                           std::size_t words) {
  std::size_t both = 0;
  std::size_t either = 0;
  for (std::size_t k = 0; k < words; ++k) {
    both += static_cast<std::size_t>(std::popcount(x[k] & y[k]));
    either += static_cast<std::size_t>(std::popcount(x[k] | y[k]));
  }
  if (either == 0) return 1.0;
  return static_cast<double>(both) / static_cast<double>(either);
}

void match_rows(const MatchTask& task, std::size_t begin, std::size_t end,
                std::vector<ClassifiedPair>& out) {
  for (std::size_t i = begin; i < end; ++i) {
    const auto wa = task.vectors_a[i].words();
    for (std::size_t j = 0; j < task.vectors_b.size(); ++j) {
      const double s =
          word_jaccard(wa.data(), task.vectors_b[j].words().data(), wa.size());
      if (s >= task.threshold) {
        out.push_back(ClassifiedPair{{task.client_a, i}, {task.client_b, j}, s,
                                     true});
      }
    }
  }
}

}  // namespace

std::vector<ClassifiedPair> match_pairwise(const MatchTask& task,
                                           unsigned workers) {
  if (task.client_a == task.client_b) {
    throw std::invalid_argument("match task needs two distinct clients");
  }
  if (!(task.threshold >= 0.0 && task.threshold <= 1.0)) {
    throw std::invalid_argument("threshold out of range");
  }
  common_length(task.vectors_a, task.vectors_b);

  const std::size_t rows = task.vectors_a.size();
  workers = std::max(1U, workers);
  if (workers == 1 || rows < 2 * workers) {
    std::vector<ClassifiedPair> out;
    match_rows(task, 0, rows, out);
    return out;
  }

  std::vector<std::vector<ClassifiedPair>> partial(workers);
  std::vector<std::jthread> threads;
  const std::size_t chunk = (rows + workers - 1) / workers;
  for (unsigned w = 0; w < workers; ++w) {
    const std::size_t begin = std::min(rows, w * chunk);
    const std::size_t end = std::min(rows, begin + chunk);
    threads.emplace_back([&, w, begin, end] {
      match_rows(task, begin, end, partial[w]);
    });
  }
  threads.clear();  // joins

  std::vector<ClassifiedPair> out;
  for (auto& part : partial) {
    out.insert(out.end(), std::make_move_iterator(part.begin()),
               std::make_move_iterator(part.end()));
  }
  return out;
}

void for_each_similarity(
    std::span<const BitVector> a, std::span<const BitVector> b,
    const std::function<void(std::size_t, std::size_t, double)>& visit) {
  common_length(a, b);
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto wa = a[i].words();
    for (std::size_t j = 0; j < b.size(); ++j) {
      visit(i, j, word_jaccard(wa.data(), b[j].words().data(), wa.size()));
    }
  }
}

}  // namespace pprl
