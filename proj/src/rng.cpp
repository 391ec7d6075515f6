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

#include "pprl/rng.hpp"

#include <limits>
#include <stdexcept>

#include "pprl/crypto.hpp"

namespace pprl {

DeterministicRng::DeterministicRng(std::uint64_t seed) : engine_(seed) {}

DeterministicRng DeterministicRng::from_bytes(std::string_view seed) {
  const auto digest = crypto::sha256(seed);
  std::vector<std::uint32_t> words;
  for (std::size_t i = 0; i < digest.size(); i += 4) {
    words.push_back((std::uint32_t{digest[i]} << 24) |
                    (std::uint32_t{digest[i + 1]} << 16) |
                    (std::uint32_t{digest[i + 2]} << 8) | digest[i + 3]);
  }
  std::seed_seq seq(words.begin(), words.end());
  return DeterministicRng(seq);
}

std::uint64_t DeterministicRng::below(std::uint64_t bound) {
  if (bound == 0) throw std::invalid_argument("bound must be positive");
  // reject the top partial bucket so every residue is equally likely
  const std::uint64_t limit =
      std::numeric_limits<std::uint64_t>::max() -
      std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t draw = engine_();
  while (draw >= limit) draw = engine_();
  return draw % bound;
}

double DeterministicRng::unit() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

std::size_t DeterministicRng::weighted(std::span<const double> weights) {
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw std::invalid_argument("weights must be non-negative");
    total += w;
  }
  if (!(total > 0.0)) throw std::invalid_argument("weights sum to zero");
  const double target = unit() * total;
  double running = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    running += weights[i];
    last_positive = i;
    if (target < running) return i;
  }
  return last_positive;
}

}  // namespace pprl
