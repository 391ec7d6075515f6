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

#include "pprl/bit_vector.hpp"

#include <bit>
#include <stdexcept>

namespace pprl {

namespace {

constexpr std::size_t kWordBits = 64;

std::size_t word_count(std::size_t length) {
  return (length + kWordBits - 1) / kWordBits;
}

void require_same_length(const BitVector& a, const BitVector& b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("bit vector lengths differ: " +
                                std::to_string(a.size()) + " vs " +
                                std::to_string(b.size()));
  }
}

}  // namespace

BitVector::BitVector(std::size_t length)
    : length_(length), words_(word_count(length), 0) {}

BitVector BitVector::from_string(std::string_view bits) {
  BitVector out(bits.size());
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (bits[i] == '1') {
      out.set(i);
    } else if (bits[i] != '0') {
      throw std::invalid_argument("bit string may only contain '0' and '1'");
    }
  }
  return out;
}

BitVector BitVector::from_bytes(std::string_view bytes, std::size_t length) {
  if (bytes.size() != (length + 7) / 8) {
    throw std::invalid_argument("payload holds " + std::to_string(bytes.size()) +
                                " bytes but bit_length " +
                                std::to_string(length) + " needs " +
                                std::to_string((length + 7) / 8));
  }
  BitVector out(length);
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    const auto byte = static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[i]));
    out.words_[i / 8] |= byte << (8 * (i % 8));
  }
  if (length % kWordBits != 0 && !out.words_.empty()) {
    const std::uint64_t mask = (std::uint64_t{1} << (length % kWordBits)) - 1;
    if ((out.words_.back() & ~mask) != 0) {
      throw std::invalid_argument("payload has bits set beyond bit_length");
    }
  }
  return out;
}

bool BitVector::test(std::size_t index) const {
  if (index >= length_) throw std::out_of_range("bit index out of range");
  return (words_[index / kWordBits] >> (index % kWordBits)) & 1U;
}

void BitVector::set(std::size_t index, bool value) {
  if (index >= length_) throw std::out_of_range("bit index out of range");
  const std::uint64_t mask = std::uint64_t{1} << (index % kWordBits);
  if (value) {
    words_[index / kWordBits] |= mask;
  } else {
    words_[index / kWordBits] &= ~mask;
  }
}

std::size_t BitVector::count() const noexcept {
  std::size_t total = 0;
  for (auto w : words_) total += static_cast<std::size_t>(std::popcount(w));
  return total;
}

BitVector BitVector::complement() const {
  BitVector out(length_);
  for (std::size_t i = 0; i < words_.size(); ++i) out.words_[i] = ~words_[i];
  if (length_ % kWordBits != 0 && !out.words_.empty()) {
    out.words_.back() &= (std::uint64_t{1} << (length_ % kWordBits)) - 1;
  }
  return out;
}

std::string BitVector::to_bytes() const {
  std::string out((length_ + 7) / 8, '\0');
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<char>((words_[i / 8] >> (8 * (i % 8))) & 0xff);
  }
  return out;
}

std::string BitVector::to_string() const {
  std::string out(length_, '0');
  for (std::size_t i = 0; i < length_; ++i) {
    if (test(i)) out[i] = '1';
  }
  return out;
}

std::size_t intersection_count(const BitVector& a, const BitVector& b) {
  require_same_length(a, b);
  const auto wa = a.words();
  const auto wb = b.words();
  std::size_t total = 0;
  for (std::size_t i = 0; i < wa.size(); ++i) {
    total += static_cast<std::size_t>(std::popcount(wa[i] & wb[i]));
  }
  return total;
}

std::size_t union_count(const BitVector& a, const BitVector& b) {
  require_same_length(a, b);
  const auto wa = a.words();
  const auto wb = b.words();
  std::size_t total = 0;
  for (std::size_t i = 0; i < wa.size(); ++i) {
    total += static_cast<std::size_t>(std::popcount(wa[i] | wb[i]));
  }
  return total;
}

double jaccard(const BitVector& a, const BitVector& b) {
  require_same_length(a, b);
  const auto wa = a.words();
  const auto wb = b.words();
  std::size_t both = 0;
  std::size_t either = 0;
  for (std::size_t i = 0; i < wa.size(); ++i) {
    both += static_cast<std::size_t>(std::popcount(wa[i] & wb[i]));
    either += static_cast<std::size_t>(std::popcount(wa[i] | wb[i]));
  }
  if (either == 0) return 1.0;
  return static_cast<double>(both) / static_cast<double>(either);
}

}  // namespace pprl
