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

// Record masking: normalization, q-gram tokenization, entropy weighting and
// the hardened CLKRBF Bloom-filter encoding (keyed double hashing, attribute
// salts, balancing, keyed permutation).

#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "pprl/bit_vector.hpp"

namespace pprl {

/// The quasi-identifier columns used throughout the suite, in scheme order.
inline const std::vector<std::string>& default_attributes() {
  static const std::vector<std::string> names = {
      "first_name", "last_name", "gender", "birth_date", "city"};
  return names;
}

struct PersonRecord {
  std::string pseudonym;
  std::map<std::string, std::string> attributes;

  friend bool operator==(const PersonRecord&, const PersonRecord&) = default;
};

struct AttributeSpec {
  std::string name;
  double weight = 0.0;
  int hash_count = 1;
  std::string salt;  // raw bytes

  friend bool operator==(const AttributeSpec&, const AttributeSpec&) = default;
};

struct EncodingScheme {
  std::size_t filter_length = 1024;  // m, before balancing
  std::size_t qgram = 2;
  std::vector<AttributeSpec> attributes;
  std::string hash_secret;       // raw bytes, HMAC key
  std::string permutation_seed;  // raw bytes
  bool balanced = true;

  /// Throws SchemeError on the first violated invariant.
  void validate() const;
  std::size_t output_length() const {
    return balanced ? 2 * filter_length : filter_length;
  }

  friend bool operator==(const EncodingScheme&, const EncodingScheme&) = default;
};

class SchemeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a record's attribute set differs from the scheme's.
class AttributeMismatch : public std::invalid_argument {
 public:
  AttributeMismatch(std::string attribute, const std::string& what)
      : std::invalid_argument(what), attribute_(std::move(attribute)) {}
  const std::string& attribute() const noexcept { return attribute_; }

 private:
  std::string attribute_;
};

using TokenSet = std::set<std::pair<std::string, std::string>>;

/// Ligature expansion, NFKD, ASCII filter, lowercase, whitespace collapse.
/// Total and idempotent; output only contains printable ASCII.
std::string preprocess(std::string_view raw);

/// Padded q-grams of an already preprocessed value. Empty value, empty set.
std::set<std::string> tokenize(std::string_view value, std::size_t q);

/// Preprocessed and tokenized (attribute, q-gram) pairs of a record.
TokenSet record_tokens(const PersonRecord& record, std::size_t q);

/// Base-2 Shannon entropy of an empirical count distribution.
double shannon_entropy(const std::map<std::string, std::size_t>& counts);

/// Entropy of each attribute's token distribution over the sample values.
std::map<std::string, double> estimate_weights(
    const std::map<std::string, std::vector<std::string>>& samples,
    std::size_t q = 2);

/// k_i = max(1, round(budget * w_i / sum w)).
std::map<std::string, int> allocate_hash_counts(
    const std::map<std::string, double>& weights, int total_budget);

struct SchemeSecrets {
  std::string hash_secret;
  std::string study_secret;  // appended to each attribute name to form its salt
  std::string permutation_seed;
};

/// Assembles a scheme from entropy weights using a budget of
/// `hashes_per_attribute` times the attribute count.
EncodingScheme build_scheme(const std::vector<std::string>& attribute_order,
                            const std::map<std::string, double>& weights,
                            const SchemeSecrets& secrets,
                            std::size_t filter_length = 1024,
                            std::size_t qgram = 2, bool balanced = true,
                            int hashes_per_attribute = 10);

/// A validated scheme with its bit permutation precomputed. Encoding many
/// records with one RecordEncoder avoids re-deriving the permutation.
class RecordEncoder {
 public:
  explicit RecordEncoder(EncodingScheme scheme);

  BitVector encode(const PersonRecord& record) const;
  /// Unbalanced, unpermuted filter of length m.
  BitVector raw_filter(const PersonRecord& record) const;

  const EncodingScheme& scheme() const noexcept { return scheme_; }

 private:
  void check_attributes(const PersonRecord& record) const;

  EncodingScheme scheme_;
  std::vector<std::uint32_t> permutation_;
};

BitVector encode(const PersonRecord& record, const EncodingScheme& scheme);

}  // namespace pprl
