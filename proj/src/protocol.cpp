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

#include "pprl/protocol.hpp"

#include <cmath>
#include <limits>

#include "pprl/crypto.hpp"

namespace pprl::protocol {

namespace {

using Kind = DecodeError::Kind;

const json& field(const json& j, const char* name) {
  if (!j.is_object()) {
    throw DecodeError(Kind::kWrongType, "expected a JSON object");
  }
  auto it = j.find(name);
  if (it == j.end()) {
    throw DecodeError(Kind::kMissingField,
                      std::string("missing field '") + name + "'");
  }
  return *it;
}

const json* optional_field(const json& j, const char* name) {
  if (!j.is_object()) {
    throw DecodeError(Kind::kWrongType, "expected a JSON object");
  }
  auto it = j.find(name);
  if (it == j.end() || it->is_null()) return nullptr;
  return &*it;
}

[[noreturn]] void wrong_type(const char* name, const char* expected) {
  throw DecodeError(Kind::kWrongType, std::string("field '") + name +
                                          "' must be " + expected);
}

std::string get_string(const json& j, const char* name) {
  const auto& v = field(j, name);
  if (!v.is_string()) wrong_type(name, "a string");
  return v.get<std::string>();
}

double get_number(const json& v, const char* name) {
  if (!v.is_number()) wrong_type(name, "a number");
  return v.get<double>();
}

std::uint64_t get_unsigned(const json& v, const char* name) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<std::int64_t>() >= 0) {
    return static_cast<std::uint64_t>(v.get<std::int64_t>());
  }
  wrong_type(name, "a non-negative integer");
}

bool get_bool(const json& v, const char* name) {
  if (!v.is_boolean()) wrong_type(name, "a boolean");
  return v.get<bool>();
}

const json& get_array(const json& j, const char* name) {
  const auto& v = field(j, name);
  if (!v.is_array()) wrong_type(name, "an array");
  return v;
}

std::string get_bytes(const json& j, const char* name) {
  auto decoded = crypto::base64_decode(get_string(j, name));
  if (!decoded) wrong_type(name, "base64 text");
  return *decoded;
}

void require(bool condition, const std::string& what) {
  if (!condition) throw DecodeError(Kind::kInvariantViolation, what);
}

std::optional<std::uint32_t> get_client_count(const json& j, const char* name) {
  const json* v = optional_field(j, name);
  if (v == nullptr) return std::nullopt;
  const auto n = get_unsigned(*v, name);
  require(n >= 1 && n <= std::numeric_limits<std::uint32_t>::max(),
          std::string(name) + " must be a positive integer");
  return static_cast<std::uint32_t>(n);
}

void require_uniform_length(const std::vector<BitVector>& vectors) {
  for (const auto& v : vectors) {
    require(v.size() == vectors.front().size(),
            "vectors do not share one bit length");
  }
}

}  // namespace

json parse(std::string_view text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw DecodeError(Kind::kMalformedJson,
                      std::string("malformed JSON: ") + e.what());
  }
}

void validate(const MatchConfig& config) {
  require(!config.session_id.empty(), "session_id is empty");
  require(config.threshold >= 0.0 && config.threshold <= 1.0,
          "threshold out of range");
  require(!config.expected_clients || *config.expected_clients >= 1,
          "expected_clients must be a positive integer");
}

// ---------------------------------------------------------------- encoding

json to_json(const BitVector& v) {
  return {{"bit_length", v.size()}, {"bits", crypto::base64_encode(v.to_bytes())}};
}

json to_json(const MatchConfig& m) {
  json j = {{"session_id", m.session_id}, {"threshold", m.threshold}};
  if (m.expected_clients) j["expected_clients"] = *m.expected_clients;
  if (m.scheme_digest) j["scheme_digest"] = *m.scheme_digest;
  return j;
}

json to_json(const SubmissionEnvelope& m) {
  json vectors = json::array();
  for (const auto& v : m.vectors) vectors.push_back(to_json(v));
  return {{"session_id", m.session_id},
          {"client_id", m.client_id},
          {"config", to_json(m.config)},
          {"vectors", std::move(vectors)}};
}

json to_json(const SessionProgress& m) {
  json j = {{"session_id", m.session_id},
            {"submitted_clients", m.submitted_clients},
            {"comparisons_done", m.comparisons_done},
            {"complete", m.complete}};
  if (m.expected_clients) j["expected_clients"] = *m.expected_clients;
  return j;
}

json to_json(const ResultRequest& m) {
  return {{"session_id", m.session_id},
          {"client_id", m.client_id},
          {"force", m.force}};
}

json to_json(const MatchResultForClient& m) {
  json matches = json::array();
  for (const auto& e : m.matches) {
    matches.push_back({{"local_index", e.local_index},
                       {"peer_client_id", e.peer_client_id},
                       {"similarity", e.similarity},
                       {"match_id", e.match_id}});
  }
  return {{"session_id", m.session_id},
          {"client_id", m.client_id},
          {"matches", std::move(matches)}};
}

json to_json(const PersonRecord& r) {
  return {{"pseudonym", r.pseudonym}, {"attributes", r.attributes}};
}

json to_json(const EncodingScheme& s) {
  json attributes = json::array();
  for (const auto& a : s.attributes) {
    attributes.push_back({{"name", a.name},
                          {"weight", a.weight},
                          {"hash_count", a.hash_count},
                          {"salt", crypto::base64_encode(a.salt)}});
  }
  return {{"filter_length", s.filter_length},
          {"qgram", s.qgram},
          {"balanced", s.balanced},
          {"hash_secret", crypto::base64_encode(s.hash_secret)},
          {"permutation_seed", crypto::base64_encode(s.permutation_seed)},
          {"attributes", std::move(attributes)}};
}

json to_json(const EncodeRequest& m) {
  json records = json::array();
  for (const auto& r : m.records) records.push_back(to_json(r));
  return {{"scheme", to_json(m.scheme)}, {"records", std::move(records)}};
}

json to_json(const EncodeResponse& m) {
  json vectors = json::array();
  for (const auto& v : m.vectors) vectors.push_back(to_json(v));
  return {{"vectors", std::move(vectors)}};
}

// ---------------------------------------------------------------- decoding

template <>
BitVector from_json<BitVector>(const json& j) {
  const auto length = get_unsigned(field(j, "bit_length"), "bit_length");
  const auto payload = get_bytes(j, "bits");
  try {
    return BitVector::from_bytes(payload, static_cast<std::size_t>(length));
  } catch (const std::invalid_argument& e) {
    throw DecodeError(Kind::kPayloadMismatch,
                      std::string("bit_length/payload mismatch: ") + e.what());
  }
}

template <>
MatchConfig from_json<MatchConfig>(const json& j) {
  MatchConfig m;
  m.session_id = get_string(j, "session_id");
  m.threshold = get_number(field(j, "threshold"), "threshold");
  m.expected_clients = get_client_count(j, "expected_clients");
  if (const json* d = optional_field(j, "scheme_digest")) {
    if (!d->is_string()) wrong_type("scheme_digest", "a string");
    m.scheme_digest = d->get<std::string>();
  }
  validate(m);
  return m;
}

template <>
SubmissionEnvelope from_json<SubmissionEnvelope>(const json& j) {
  SubmissionEnvelope m;
  m.session_id = get_string(j, "session_id");
  m.client_id = get_string(j, "client_id");
  m.config = from_json<MatchConfig>(field(j, "config"));
  for (const auto& v : get_array(j, "vectors")) {
    m.vectors.push_back(from_json<BitVector>(v));
  }
  require(!m.client_id.empty(), "client_id is empty");
  require(m.session_id == m.config.session_id,
          "envelope session_id differs from config.session_id");
  require_uniform_length(m.vectors);
  return m;
}

template <>
SessionProgress from_json<SessionProgress>(const json& j) {
  SessionProgress m;
  m.session_id = get_string(j, "session_id");
  m.submitted_clients =
      get_unsigned(field(j, "submitted_clients"), "submitted_clients");
  m.expected_clients = get_client_count(j, "expected_clients");
  m.comparisons_done =
      get_unsigned(field(j, "comparisons_done"), "comparisons_done");
  m.complete = get_bool(field(j, "complete"), "complete");
  require(!m.complete || (m.expected_clients &&
                          m.submitted_clients == *m.expected_clients),
          "complete session must have all expected clients");
  return m;
}

template <>
ResultRequest from_json<ResultRequest>(const json& j) {
  ResultRequest m;
  m.session_id = get_string(j, "session_id");
  m.client_id = get_string(j, "client_id");
  if (const json* f = optional_field(j, "force")) m.force = get_bool(*f, "force");
  require(!m.session_id.empty() && !m.client_id.empty(),
          "session_id and client_id must be non-empty");
  return m;
}

template <>
MatchResultForClient from_json<MatchResultForClient>(const json& j) {
  MatchResultForClient m;
  m.session_id = get_string(j, "session_id");
  m.client_id = get_string(j, "client_id");
  for (const auto& e : get_array(j, "matches")) {
    MatchEntry entry;
    entry.local_index = get_unsigned(field(e, "local_index"), "local_index");
    entry.peer_client_id = get_string(e, "peer_client_id");
    entry.similarity = get_number(field(e, "similarity"), "similarity");
    if (const json* id = optional_field(e, "match_id")) {
      if (!id->is_string()) wrong_type("match_id", "a string");
      entry.match_id = id->get<std::string>();
    }
    require(entry.similarity >= 0.0 && entry.similarity <= 1.0,
            "similarity out of range");
    require(entry.peer_client_id != m.client_id,
            "match entry references the requesting client");
    m.matches.push_back(std::move(entry));
  }
  return m;
}

template <>
PersonRecord from_json<PersonRecord>(const json& j) {
  PersonRecord r;
  r.pseudonym = get_string(j, "pseudonym");
  const auto& attributes = field(j, "attributes");
  if (!attributes.is_object()) wrong_type("attributes", "an object");
  for (const auto& [name, value] : attributes.items()) {
    if (!value.is_string()) wrong_type("attributes", "an object of strings");
    r.attributes.emplace(name, value.get<std::string>());
  }
  require(!r.pseudonym.empty(), "pseudonym is empty");
  return r;
}

template <>
EncodingScheme from_json<EncodingScheme>(const json& j) {
  EncodingScheme s;
  s.filter_length = static_cast<std::size_t>(
      get_unsigned(field(j, "filter_length"), "filter_length"));
  s.qgram = static_cast<std::size_t>(get_unsigned(field(j, "qgram"), "qgram"));
  s.balanced = get_bool(field(j, "balanced"), "balanced");
  s.hash_secret = get_bytes(j, "hash_secret");
  s.permutation_seed = get_bytes(j, "permutation_seed");
  for (const auto& a : get_array(j, "attributes")) {
    AttributeSpec spec;
    spec.name = get_string(a, "name");
    spec.weight = get_number(field(a, "weight"), "weight");
    const auto k = get_unsigned(field(a, "hash_count"), "hash_count");
    require(k <= static_cast<std::uint64_t>(std::numeric_limits<int>::max()),
            "hash_count too large");
    spec.hash_count = static_cast<int>(k);
    spec.salt = get_bytes(a, "salt");
    s.attributes.push_back(std::move(spec));
  }
  try {
    s.validate();
  } catch (const SchemeError& e) {
    throw DecodeError(Kind::kInvariantViolation, e.what());
  }
  return s;
}

template <>
EncodeRequest from_json<EncodeRequest>(const json& j) {
  EncodeRequest m;
  m.scheme = from_json<EncodingScheme>(field(j, "scheme"));
  for (const auto& r : get_array(j, "records")) {
    m.records.push_back(from_json<PersonRecord>(r));
  }
  require(!m.records.empty(), "records list is empty");
  return m;
}

template <>
EncodeResponse from_json<EncodeResponse>(const json& j) {
  EncodeResponse m;
  for (const auto& v : get_array(j, "vectors")) {
    m.vectors.push_back(from_json<BitVector>(v));
  }
  if (!m.vectors.empty()) require_uniform_length(m.vectors);
  return m;
}

std::string scheme_digest(const EncodingScheme& scheme) {
  // nlohmann::json objects keep keys sorted, so dump() is canonical
  const auto canonical = to_json(scheme).dump();
  return crypto::to_hex(crypto::hmac_sha256(scheme.hash_secret, canonical));
}

}  // namespace pprl::protocol
