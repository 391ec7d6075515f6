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
#include <string_view>
#include <vector>

namespace pprl {

/// Fixed-length bit string stored in 64-bit words, bit i at word i/64,
/// position i%64. Bits past `size()` in the last word are always zero.
class BitVector {
 public:
  BitVector() = default;
  explicit BitVector(std::size_t length);

  /// Parses a string of '0'/'1' characters; character i is bit i.
  static BitVector from_string(std::string_view bits);

  /// Inverse of to_bytes(). Throws std::invalid_argument when the payload
  /// size is not ceil(length/8) or padding bits are set.
  static BitVector from_bytes(std::string_view bytes, std::size_t length);

  std::size_t size() const noexcept { return length_; }
  bool test(std::size_t index) const;
  void set(std::size_t index, bool value = true);

  /// Hamming weight.
  std::size_t count() const noexcept;
  BitVector complement() const;

  /// Bits packed little-endian within bytes: bit i is (byte[i/8] >> (i%8)) & 1.
  std::string to_bytes() const;
  std::string to_string() const;

  std::span<const std::uint64_t> words() const noexcept { return words_; }

  friend bool operator==(const BitVector&, const BitVector&) = default;

 private:
  std::size_t length_ = 0;
  std::vector<std::uint64_t> words_;
};

std::size_t intersection_count(const BitVector& a, const BitVector& b);
std::size_t union_count(const BitVector& a, const BitVector& b);

/// |a AND b| / |a OR b|, with 1.0 for two all-zero vectors.
/// Throws std::invalid_argument on a length mismatch.
double jaccard(const BitVector& a, const BitVector& b);

}  // namespace pprl
