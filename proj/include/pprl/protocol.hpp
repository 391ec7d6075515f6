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

// Wire model shared by the encoder, resolver, broker and train. Every message
// is a JSON document; bit vectors travel as base64 of their little-endian
// packed bytes next to an explicit bit length. See docs/protocol.md.

#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "pprl/bit_vector.hpp"
#include "pprl/masking.hpp"

namespace pprl::protocol {

using nlohmann::json;

class DecodeError : public std::runtime_error {
 public:
  enum class Kind {
    kMalformedJson,
    kMissingField,
    kWrongType,
    kInvariantViolation,
    kPayloadMismatch,
  };

  DecodeError(Kind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

struct MatchConfig {
  std::string session_id;
  double threshold = 1.0;
  std::optional<std::uint32_t> expected_clients;
  // Filled in by the resolver; required on broker submissions.
  std::optional<std::string> scheme_digest;

  friend bool operator==(const MatchConfig&, const MatchConfig&) = default;
};

struct SubmissionEnvelope {
  std::string session_id;
  std::string client_id;
  MatchConfig config;
  std::vector<BitVector> vectors;

  friend bool operator==(const SubmissionEnvelope&,
                         const SubmissionEnvelope&) = default;
};

struct SessionProgress {
  std::string session_id;
  std::uint64_t submitted_clients = 0;
  std::optional<std::uint32_t> expected_clients;
  std::uint64_t comparisons_done = 0;
  bool complete = false;

  friend bool operator==(const SessionProgress&,
                         const SessionProgress&) = default;
};

struct ResultRequest {
  std::string session_id;
  std::string client_id;
  bool force = false;

  friend bool operator==(const ResultRequest&, const ResultRequest&) = default;
};

struct MatchEntry {
  std::uint64_t local_index = 0;
  std::string peer_client_id;
  double similarity = 0.0;
  // Opaque token shared by both clients' views of the same pair.
  std::string match_id;

  friend bool operator==(const MatchEntry&, const MatchEntry&) = default;
};

struct MatchResultForClient {
  std::string session_id;
  std::string client_id;
  std::vector<MatchEntry> matches;

  friend bool operator==(const MatchResultForClient&,
                         const MatchResultForClient&) = default;
};

struct EncodeRequest {
  EncodingScheme scheme;
  std::vector<PersonRecord> records;

  friend bool operator==(const EncodeRequest&, const EncodeRequest&) = default;
};

struct EncodeResponse {
  std::vector<BitVector> vectors;

  friend bool operator==(const EncodeResponse&, const EncodeResponse&) = default;
};

json to_json(const BitVector& v);
json to_json(const MatchConfig& m);
json to_json(const SubmissionEnvelope& m);
json to_json(const SessionProgress& m);
json to_json(const ResultRequest& m);
json to_json(const MatchResultForClient& m);
json to_json(const PersonRecord& r);
json to_json(const EncodingScheme& s);
json to_json(const EncodeRequest& m);
json to_json(const EncodeResponse& m);

/// Decodes and validates one message from parsed JSON. Unknown fields are
/// ignored; missing or mistyped required fields raise DecodeError.
template <typename T>
T from_json(const json& j);

template <>
BitVector from_json<BitVector>(const json& j);
template <>
MatchConfig from_json<MatchConfig>(const json& j);
template <>
SubmissionEnvelope from_json<SubmissionEnvelope>(const json& j);
template <>
SessionProgress from_json<SessionProgress>(const json& j);
template <>
ResultRequest from_json<ResultRequest>(const json& j);
template <>
MatchResultForClient from_json<MatchResultForClient>(const json& j);
template <>
PersonRecord from_json<PersonRecord>(const json& j);
template <>
EncodingScheme from_json<EncodingScheme>(const json& j);
template <>
EncodeRequest from_json<EncodeRequest>(const json& j);
template <>
EncodeResponse from_json<EncodeResponse>(const json& j);

/// Parses text as JSON, raising DecodeError(kMalformedJson) on failure.
json parse(std::string_view text);

template <typename T>
std::string serialize(const T& message) {
  return to_json(message).dump();
}

template <typename T>
T deserialize(std::string_view text) {
  return from_json<T>(parse(text));
}

/// Fingerprint of a scheme that stations can compare without revealing the
/// secrets: hex HMAC-SHA-256 under the hash secret of the canonical scheme
/// document.
std::string scheme_digest(const EncodingScheme& scheme);

/// Throws DecodeError(kInvariantViolation) for an out-of-range threshold or
/// an empty session id.
void validate(const MatchConfig& config);

}  // namespace pprl::protocol
