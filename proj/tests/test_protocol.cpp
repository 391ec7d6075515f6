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


#include <doctest.h>

#include <random>

#include "pprl/crypto.hpp"
#include "pprl/protocol.hpp"
#include "support.hpp"

using namespace pprl;
using namespace pprl::protocol;

namespace {

DecodeError::Kind kind_of(const std::string& text, auto decode) {
  try {
    decode(text);
  } catch (const DecodeError& e) {
    return e.kind();
  }
  FAIL("expected a decode error for " << text);
  return DecodeError::Kind::kMalformedJson;
}

SubmissionEnvelope random_envelope(std::mt19937_64& gen) {
  std::uniform_int_distribution<std::size_t> count(1, 6);
  std::uniform_int_distribution<std::size_t> length(1, 300);
  SubmissionEnvelope e;
  e.session_id = crypto::random_uuid();
  e.client_id = crypto::random_uuid();
  e.config.session_id = e.session_id;
  e.config.threshold = std::uniform_int_distribution<int>(0, 100)(gen) / 100.0;
  if (gen() % 2) e.config.expected_clients = static_cast<std::uint32_t>(2 + gen() % 5);
  if (gen() % 2) e.config.scheme_digest = crypto::to_hex(crypto::random_bytes(32));
  const auto len = length(gen);
  for (std::size_t i = count(gen); i > 0; --i) e.vectors.push_back(testing::random_vector(len, gen()));
  return e;
}

}  // namespace

TEST_SUITE("protocol") {
  TEST_CASE("vector wire form") {
    const auto j = to_json(BitVector::from_string("110000000001"));
    CHECK(j.at("bit_length") == 12);
    CHECK(crypto::base64_decode(j.at("bits").get<std::string>()) == std::string("\x03\x08", 2));
    CHECK(from_json<BitVector>(j) == BitVector::from_string("110000000001"));
  }

  TEST_CASE("envelope round trip over random messages") {
    std::mt19937_64 gen(77);
    for (int i = 0; i < 100; ++i) {
      const auto e = random_envelope(gen);
      CHECK(deserialize<SubmissionEnvelope>(serialize(e)) == e);
    }
  }

  TEST_CASE("other messages round trip") {
    SessionProgress p{"s", 2, 3, 200, false};
    CHECK(deserialize<SessionProgress>(serialize(p)) == p);
    p.expected_clients.reset();
    CHECK(deserialize<SessionProgress>(serialize(p)) == p);
    const ResultRequest r{"s", "c", true};
    CHECK(deserialize<ResultRequest>(serialize(r)) == r);
    const MatchResultForClient m{"s", "c", {{3, "B", 0.92, "abc"}, {7, "C", 1.0, "def"}}};
    CHECK(deserialize<MatchResultForClient>(serialize(m)) == m);
    const auto scheme = testing::test_scheme();
    CHECK(deserialize<EncodingScheme>(serialize(scheme)) == scheme);
    const EncodeRequest req{scheme, {{"P-1", {{"first_name", "Anna"}}}}};
    CHECK(deserialize<EncodeRequest>(serialize(req)) == req);
    const EncodeResponse res{{BitVector::from_string("1010")}};
    CHECK(deserialize<EncodeResponse>(serialize(res)) == res);
  }

  TEST_CASE("threshold out of range is a decode error") {
    const std::string text = R"({"session_id":"s","threshold":1.5})";
    try {
      (void)deserialize<MatchConfig>(text);
      FAIL("expected DecodeError");
    } catch (const DecodeError& e) {
      CHECK(e.kind() == DecodeError::Kind::kInvariantViolation);
      CHECK(std::string(e.what()).find("threshold out of range") != std::string::npos);
    }
  }

  TEST_CASE("decode errors are distinct") {
    auto config = [](const std::string& t) { (void)deserialize<MatchConfig>(t); };
    auto vector = [](const std::string& t) { (void)deserialize<BitVector>(t); };
    CHECK(kind_of("{not json", config) == DecodeError::Kind::kMalformedJson);
    CHECK(kind_of(R"({"threshold":0.5})", config) == DecodeError::Kind::kMissingField);
    CHECK(kind_of(R"({"session_id":5,"threshold":0.5})", config) ==
          DecodeError::Kind::kWrongType);
    CHECK(kind_of(R"({"session_id":"","threshold":0.5})", config) ==
          DecodeError::Kind::kInvariantViolation);
    CHECK(kind_of(R"({"bit_length":12,"bits":"AwgA"})", vector) ==
          DecodeError::Kind::kPayloadMismatch);
    CHECK(kind_of(R"({"bit_length":12,"bits":"A*g="})", vector) ==
          DecodeError::Kind::kWrongType);
  }

  TEST_CASE("envelope invariants") {
    std::mt19937_64 gen(5);
    auto e = random_envelope(gen);
    e.vectors.push_back(BitVector(e.vectors.front().size() + 1));
    CHECK_THROWS_AS((void)deserialize<SubmissionEnvelope>(serialize(e)), DecodeError);
    e = random_envelope(gen);
    auto j = to_json(e);
    j["config"]["session_id"] = "other";
    CHECK_THROWS_AS((void)from_json<SubmissionEnvelope>(j), DecodeError);
  }

  TEST_CASE("unknown fields are ignored") {
    const auto c = deserialize<MatchConfig>(
        R"({"session_id":"s","threshold":0.5,"future_field":[1,2,3]})");
    CHECK(c.session_id == "s");
    CHECK(c.threshold == 0.5);
    CHECK_FALSE(c.expected_clients.has_value());
  }

  TEST_CASE("scheme digest is keyed and sensitive to every field") {
    const auto scheme = testing::test_scheme();
    const auto digest = scheme_digest(scheme);
    CHECK(digest.size() == 64);
    CHECK(scheme_digest(scheme) == digest);
    auto other = scheme;
    other.attributes[0].hash_count += 1;
    CHECK(scheme_digest(other) != digest);
    other = scheme;
    other.hash_secret = std::string(32, 'q');
    CHECK(scheme_digest(other) != digest);
    other = scheme;
    other.permutation_seed = "p";
    CHECK(scheme_digest(other) != digest);
  }
}
