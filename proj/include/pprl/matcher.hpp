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

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "pprl/bit_vector.hpp"
#include "pprl/similarity.hpp"

namespace pprl {

struct MatchTask {
  std::string session_id;
  std::string client_a;
  std::string client_b;
  std::span<const BitVector> vectors_a;
  std::span<const BitVector> vectors_b;
  double threshold = 1.0;
};

/// Full cross product of the task's two vector lists. Returns the pairs with
/// jaccard >= threshold, ordered by (index in A, index in B). `workers` > 1
/// splits A into contiguous chunks processed on separate threads.
std::vector<ClassifiedPair> match_pairwise(const MatchTask& task,
                                           unsigned workers = 1);

/// Calls `visit(i, j, similarity)` for every pair of the cross product.
/// Used for threshold sweeps, where below-threshold scores matter too.
void for_each_similarity(
    std::span<const BitVector> a, std::span<const BitVector> b,
    const std::function<void(std::size_t, std::size_t, double)>& visit);

}  // namespace pprl
