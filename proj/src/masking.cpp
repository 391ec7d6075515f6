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

#include "pprl/masking.hpp"

#include <unicode/normalizer2.h>
#include <unicode/unistr.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include "pprl/crypto.hpp"
#include "pprl/rng.hpp"

namespace pprl {

namespace {

constexpr std::size_t kMaxFilterLength = std::size_t{1} << 24;

// Latin ligatures and their expansions. Compatibility ligatures such as
// U+FB01 would also be handled by NFKD; they are listed for completeness.
const std::unordered_map<UChar32, const char*>& ligature_table() {
  static const std::unordered_map<UChar32, const char*> table = {
      {0x00DF, "ss"}, {0x1E9E, "SS"}, {0x00C6, "AE"}, {0x00E6, "ae"},
      {0x0152, "OE"}, {0x0153, "oe"}, {0x01E2, "AE"}, {0x01E3, "ae"},
      {0x01FC, "AE"}, {0x01FD, "ae"}, {0x0132, "IJ"}, {0x0133, "ij"},
      {0x0276, "oe"}, {0x1D6B, "ue"}, {0x0238, "db"}, {0x0239, "qp"},
      {0x01F6, "HV"}, {0x0195, "hv"}, {0xA732, "AA"}, {0xA733, "aa"},
      {0xA734, "AO"}, {0xA735, "ao"}, {0xA736, "AU"}, {0xA737, "au"},
      {0xA738, "AV"}, {0xA739, "av"}, {0xA73A, "AV"}, {0xA73B, "av"},
      {0xA73C, "AY"}, {0xA73D, "ay"}, {0xA74E, "OO"}, {0xA74F, "oo"},
      {0xA760, "VY"}, {0xA761, "vy"}, {0xFB00, "ff"}, {0xFB01, "fi"},
      {0xFB02, "fl"}, {0xFB03, "ffi"}, {0xFB04, "ffl"}, {0xFB05, "st"},
      {0xFB06, "st"},
  };
  return table;
}

icu::UnicodeString expand_ligatures(const icu::UnicodeString& in) {
  const auto& table = ligature_table();
  icu::UnicodeString out;
  for (int32_t i = 0; i < in.length();) {
    const UChar32 c = in.char32At(i);
    if (auto it = table.find(c); it != table.end()) {
      out.append(icu::UnicodeString::fromUTF8(it->second));
    } else {
      out.append(c);
    }
    i = in.moveIndex32(i, 1);
  }
  return out;
}

bool is_ascii_space(unsigned char c) {
  return c == ' ' || (c >= '\t' && c <= '\r');
}

}  // namespace

std::string preprocess(std::string_view raw) {
  icu::UnicodeString text = icu::UnicodeString::fromUTF8(
      icu::StringPiece(raw.data(), static_cast<int32_t>(raw.size())));
  text = expand_ligatures(text);

  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* nfkd = icu::Normalizer2::getNFKDInstance(status);
  if (U_FAILURE(status)) throw std::runtime_error("ICU NFKD unavailable");
  icu::UnicodeString decomposed = nfkd->normalize(text, status);
  if (U_FAILURE(status)) throw std::runtime_error("ICU normalization failed");

  std::string utf8;
  decomposed.toUTF8String(utf8);

  // Every byte of a multi-byte UTF-8 sequence is >= 0x80, so dropping those
  // bytes drops exactly the non-ASCII code points.
  std::string out;
  out.reserve(utf8.size());
  bool pending_space = false;
  for (unsigned char c : utf8) {
    if (c >= 0x80) continue;
    if (is_ascii_space(c)) {
      pending_space = true;
      continue;
    }
    if (c < 0x20 || c == 0x7f) continue;
    if (pending_space && !out.empty()) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(c >= 'A' && c <= 'Z' ? c + ('a' - 'A') : c));
  }
  return out;
}

std::set<std::string> tokenize(std::string_view value, std::size_t q) {
  if (q == 0) throw std::invalid_argument("q-gram size must be at least 1");
  std::set<std::string> tokens;
  if (value.empty()) return tokens;
  std::string padded(q - 1, '_');
  padded.append(value);
  padded.append(q - 1, '_');
  for (std::size_t i = 0; i + q <= padded.size(); ++i) {
    tokens.insert(padded.substr(i, q));
  }
  return tokens;
}

TokenSet record_tokens(const PersonRecord& record, std::size_t q) {
  TokenSet out;
  for (const auto& [name, value] : record.attributes) {
    for (auto& token : tokenize(preprocess(value), q)) {
      out.emplace(name, std::move(token));
    }
  }
  return out;
}

double shannon_entropy(const std::map<std::string, std::size_t>& counts) {
  std::size_t total = 0;
  for (const auto& [token, count] : counts) total += count;
  if (total == 0) return 0.0;
  double entropy = 0.0;
  for (const auto& [token, count] : counts) {
    if (count == 0) continue;
    const double p = static_cast<double>(count) / static_cast<double>(total);
    entropy -= p * std::log2(p);
  }
  // -0.0 for the single-token case
  return entropy == 0.0 ? 0.0 : entropy;
}

std::map<std::string, double> estimate_weights(
    const std::map<std::string, std::vector<std::string>>& samples,
    std::size_t q) {
  std::map<std::string, double> weights;
  for (const auto& [name, values] : samples) {
    if (values.empty()) {
      throw std::invalid_argument("no sample values for attribute '" + name +
                                  "'");
    }
    std::map<std::string, std::size_t> counts;
    for (const auto& value : values) {
      for (const auto& token : tokenize(preprocess(value), q)) ++counts[token];
    }
    weights[name] = shannon_entropy(counts);
  }
  return weights;
}

std::map<std::string, int> allocate_hash_counts(
    const std::map<std::string, double>& weights, int total_budget) {
  if (weights.empty()) throw std::invalid_argument("no attributes to allocate");
  if (total_budget < static_cast<int>(weights.size())) {
    throw std::invalid_argument(
        "hash budget must be at least the number of attributes");
  }
  double sum = 0.0;
  for (const auto& [name, w] : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw std::invalid_argument("weight for '" + name +
                                  "' must be a finite non-negative number");
    }
    sum += w;
  }
  if (sum <= 0.0) throw std::invalid_argument("all attribute weights are zero");
  std::map<std::string, int> counts;
  for (const auto& [name, w] : weights) {
    const auto share = std::lround(static_cast<double>(total_budget) * w / sum);
    counts[name] = std::max(1, static_cast<int>(share));
  }
  return counts;
}

EncodingScheme build_scheme(const std::vector<std::string>& attribute_order,
                            const std::map<std::string, double>& weights,
                            const SchemeSecrets& secrets,
                            std::size_t filter_length, std::size_t qgram,
                            bool balanced, int hashes_per_attribute) {
  std::map<std::string, double> selected;
  for (const auto& name : attribute_order) {
    auto it = weights.find(name);
    if (it == weights.end()) {
      throw SchemeError("no weight for attribute '" + name + "'");
    }
    selected.emplace(name, it->second);
  }
  const auto counts = allocate_hash_counts(
      selected, hashes_per_attribute * static_cast<int>(attribute_order.size()));

  EncodingScheme scheme;
  scheme.filter_length = filter_length;
  scheme.qgram = qgram;
  scheme.balanced = balanced;
  scheme.hash_secret = secrets.hash_secret;
  scheme.permutation_seed = secrets.permutation_seed;
  for (const auto& name : attribute_order) {
    scheme.attributes.push_back(AttributeSpec{
        name, selected.at(name), counts.at(name), name + secrets.study_secret});
  }
  scheme.validate();
  return scheme;
}

void EncodingScheme::validate() const {
  if (filter_length == 0 || !std::has_single_bit(filter_length)) {
    throw SchemeError("filter length must be a power of two");
  }
  if (filter_length > kMaxFilterLength) {
    throw SchemeError("filter length exceeds " +
                      std::to_string(kMaxFilterLength));
  }
  if (qgram == 0) throw SchemeError("q-gram size must be at least 1");
  if (attributes.empty()) throw SchemeError("scheme declares no attributes");
  if (hash_secret.empty()) throw SchemeError("hash secret is empty");
  if (balanced && permutation_seed.empty()) {
    throw SchemeError("balanced scheme needs a permutation seed");
  }
  std::set<std::string> names;
  std::set<std::string> salts;
  for (const auto& attr : attributes) {
    if (attr.name.empty()) throw SchemeError("attribute name is empty");
    if (!names.insert(attr.name).second) {
      throw SchemeError("attribute '" + attr.name + "' declared twice");
    }
    if (!salts.insert(attr.salt).second) {
      throw SchemeError("salt of attribute '" + attr.name + "' is not unique");
    }
    if (!(attr.weight >= 0.0) || !std::isfinite(attr.weight)) {
      throw SchemeError("weight of attribute '" + attr.name +
                        "' must be finite and non-negative");
    }
    if (attr.hash_count < 1 ||
        static_cast<std::size_t>(attr.hash_count) > filter_length) {
      throw SchemeError("hash count of attribute '" + attr.name +
                        "' must be in [1, filter length]");
    }
  }
  for (const auto& a : attributes) {
    for (const auto& b : attributes) {
      if (a.weight > b.weight && a.hash_count < b.hash_count) {
        throw SchemeError("attribute '" + a.name +
                          "' has a higher weight but fewer hashes than '" +
                          b.name + "'");
      }
    }
  }
}

RecordEncoder::RecordEncoder(EncodingScheme scheme) : scheme_(std::move(scheme)) {
  scheme_.validate();
  if (scheme_.balanced) {
    permutation_.resize(scheme_.output_length());
    std::iota(permutation_.begin(), permutation_.end(), 0U);
    auto rng = DeterministicRng::from_bytes(scheme_.permutation_seed);
    rng.shuffle(permutation_);
  }
}

void RecordEncoder::check_attributes(const PersonRecord& record) const {
  for (const auto& attr : scheme_.attributes) {
    if (!record.attributes.contains(attr.name)) {
      throw AttributeMismatch(attr.name, "record lacks attribute '" +
                                             attr.name +
                                             "' declared in the scheme");
    }
  }
  if (record.attributes.size() != scheme_.attributes.size()) {
    for (const auto& [name, value] : record.attributes) {
      const bool declared = std::any_of(
          scheme_.attributes.begin(), scheme_.attributes.end(),
          [&](const AttributeSpec& a) { return a.name == name; });
      if (!declared) {
        throw AttributeMismatch(name, "record has attribute '" + name +
                                          "' not declared in the scheme");
      }
    }
  }
}

BitVector RecordEncoder::raw_filter(const PersonRecord& record) const {
  check_attributes(record);
  const std::uint64_t mask = scheme_.filter_length - 1;
  BitVector filter(scheme_.filter_length);
  std::string input;
  for (const auto& attr : scheme_.attributes) {
    const auto value = preprocess(record.attributes.at(attr.name));
    for (const auto& token : tokenize(value, scheme_.qgram)) {
      input.assign(attr.salt);
      input.append(token);
      input.push_back('\x01');
      const std::uint64_t h1 =
          crypto::leading_u64(crypto::hmac_sha256(scheme_.hash_secret, input));
      input.back() = '\x02';
      // odd step is coprime with the power-of-two m: k distinct positions
      const std::uint64_t h2 =
          crypto::leading_u64(crypto::hmac_sha256(scheme_.hash_secret, input)) |
          1U;
      for (int j = 0; j < attr.hash_count; ++j) {
        filter.set(static_cast<std::size_t>(
            (h1 + static_cast<std::uint64_t>(j) * h2) & mask));
      }
    }
  }
  return filter;
}

BitVector RecordEncoder::encode(const PersonRecord& record) const {
  BitVector filter = raw_filter(record);
  if (!scheme_.balanced) return filter;

  const std::size_t m = scheme_.filter_length;
  BitVector out(2 * m);
  for (std::size_t i = 0; i < m; ++i) {
    // position i holds the filter bit, position m + i its complement
    if (filter.test(i)) {
      out.set(permutation_[i]);
    } else {
      out.set(permutation_[m + i]);
    }
  }
  return out;
}

BitVector encode(const PersonRecord& record, const EncodingScheme& scheme) {
  return RecordEncoder(scheme).encode(record);
}

}  // namespace pprl
