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

#include <algorithm>
#include <thread>

#include "pprl/broker_service.hpp"
#include "pprl/csv.hpp"
#include "pprl/encoder_service.hpp"
#include "pprl/protocol.hpp"
#include "pprl/resolver_service.hpp"
#include "support.hpp"

using namespace pprl;
using nlohmann::json;

namespace {

const char* kMpi =
    "pseudonym,first_name,last_name,gender,birth_date,city\n"
    "P-1,Anna,Schmidt,F,1990-04-12,Leipzig\n"
    "P-2,Jonas,Weber,M,1985-11-02,Bremen\n"
    "P-3,Lena,Fischer,F,1979-06-30,Kiel\n";

const char* kMpiPeer =
    "pseudonym,first_name,last_name,gender,birth_date,city\n"
    "Q-1,Anna,Schmidt,F,1990-04-12,Leipzig\n"
    "Q-2,Paul,Wagner,M,1961-01-15,Dresden\n";

PersonRecord anna() {
  return {"P-1", {{"first_name", "Anna"},
                  {"last_name", "Schmidt"},
                  {"gender", "F"},
                  {"birth_date", "1990-04-12"},
                  {"city", "Leipzig"}}};
}

json body_of(const http::Response& r) { return json::parse(r.body); }

protocol::SubmissionEnvelope envelope(const std::string& session, const std::string& client,
                                      std::vector<BitVector> vectors, double threshold = 0.8,
                                      std::optional<std::uint32_t> expected = std::nullopt) {
  protocol::SubmissionEnvelope e;
  e.session_id = session;
  e.client_id = client;
  e.config = {session, threshold, expected, std::string("digest")};
  e.vectors = std::move(vectors);
  return e;
}

std::vector<BitVector> vectors(std::size_t n, std::uint64_t seed, std::size_t length = 128) {
  std::vector<BitVector> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(testing::random_vector(length, seed + i));
  return out;
}

json submission_body(const std::string& session, std::vector<std::string> pseudonyms,
                     std::optional<std::uint32_t> expected = std::nullopt,
                     double threshold = 0.9) {
  protocol::MatchConfig config{session, threshold, expected, std::nullopt};
  return {{"config", protocol::to_json(config)}, {"pseudonyms", std::move(pseudonyms)}};
}

}  // namespace

TEST_SUITE("encoder") {
  TEST_CASE("encode preserves order and is deterministic") {
    EncoderService service;
    const auto scheme = testing::test_scheme();
    protocol::EncodeRequest req{scheme, {anna(), anna(), anna()}};
    req.records[1].attributes["first_name"] = "Berta";
    req.records[2].attributes["city"] = "Bonn";
    const auto first = service.handle_encode(protocol::serialize(req));
    REQUIRE(first.status == 200);
    const auto res = protocol::deserialize<protocol::EncodeResponse>(first.body);
    REQUIRE(res.vectors.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) CHECK(res.vectors[i] == encode(req.records[i], scheme));
    CHECK(service.handle_encode(protocol::serialize(req)).body == first.body);
    EncoderService other;
    CHECK(other.handle_encode(protocol::serialize(req)).body == first.body);
  }

  TEST_CASE("missing attribute is a 422 naming it") {
    EncoderService service;
    protocol::EncodeRequest req{testing::test_scheme(), {anna()}};
    req.records[0].attributes.erase("city");
    const auto r = service.handle_encode(protocol::serialize(req));
    CHECK(r.status == 422);
    CHECK(body_of(r).at("attribute") == "city");
  }

  TEST_CASE("invalid requests are 400") {
    EncoderService service;
    CHECK(service.handle_encode("{").status == 400);
    CHECK(service.handle_encode("{}").status == 400);
    auto scheme = testing::test_scheme();
    scheme.filter_length = 1000;
    CHECK(service.handle_encode(protocol::serialize(protocol::EncodeRequest{scheme, {anna()}}))
              .status == 400);
    CHECK(service.handle_encode(
                     protocol::serialize(protocol::EncodeRequest{testing::test_scheme(), {}}))
              .status == 400);
  }

  TEST_CASE("http surface") {
    testing::ServiceStack stack({});
    CHECK(http::get(stack.encoder_url(), "/health").status == 200);
    protocol::EncodeRequest req{testing::test_scheme(), {anna()}};
    const auto r = http::post(stack.encoder_url(), "/encode", protocol::serialize(req));
    CHECK(r.status == 200);
    CHECK(http::get(stack.encoder_url(), "/nowhere").status == 404);
  }
}

TEST_SUITE("broker") {
  TEST_CASE("progress, comparisons and results") {
    Broker broker;
    const auto a = vectors(10, 100);
    auto b = vectors(20, 200);
    b[7] = a[3];
    const auto ack = broker.submit(envelope("s1", "A", a));
    CHECK(ack.at("stored") == 10);
    auto p = broker.progress("s1");
    CHECK(p.submitted_clients == 1);
    CHECK(p.comparisons_done == 0);
    broker.submit(envelope("s1", "B", b));
    broker.wait_idle();
    p = broker.progress("s1");
    CHECK(p.comparisons_done == 200);
    CHECK_FALSE(p.complete);  // no expected_clients

    const auto ra = broker.results("s1", "A", true);
    const auto rb = broker.results("s1", "B", true);
    REQUIRE(ra.matches.size() == 1);
    REQUIRE(rb.matches.size() == 1);
    CHECK(ra.matches[0].local_index == 3);
    CHECK(ra.matches[0].peer_client_id == "B");
    CHECK(rb.matches[0].local_index == 7);
    CHECK(rb.matches[0].peer_client_id == "A");
    CHECK(ra.matches[0].similarity == rb.matches[0].similarity);
    CHECK(ra.matches[0].match_id == rb.matches[0].match_id);
    CHECK_THROWS_AS(broker.results("s1", "A"), http::ServiceError);
  }

  TEST_CASE("completion needs expected clients and finished matching") {
    Broker broker;
    broker.submit(envelope("s", "A", vectors(5, 1), 0.8, 3));
    broker.submit(envelope("s", "B", vectors(5, 2), 0.8, 3));
    broker.wait_idle();
    auto p = broker.progress("s");
    CHECK(p.submitted_clients == 2);
    CHECK(p.expected_clients == 3u);
    CHECK_FALSE(p.complete);
    try {
      broker.results("s", "A");
      FAIL("expected 409");
    } catch (const http::ServiceError& e) {
      CHECK(e.status() == 409);
      CHECK(e.body().at("progress").at("submitted_clients") == 2);
    }
    broker.submit(envelope("s", "C", vectors(5, 3), 0.8, 3));
    broker.wait_idle();
    p = broker.progress("s");
    CHECK(p.complete);
    CHECK(p.comparisons_done == 75);
    const auto first = protocol::serialize(broker.results("s", "B"));
    CHECK(protocol::serialize(broker.results("s", "B")) == first);
    try {
      broker.submit(envelope("s", "D", vectors(5, 4), 0.8, 3));
      FAIL("expected 409");
    } catch (const http::ServiceError& e) {
      CHECK(e.status() == 409);
    }
  }

  TEST_CASE("submission errors") {
    Broker broker;
    broker.submit(envelope("s", "A", vectors(3, 1)));
    auto status_of = [&](const protocol::SubmissionEnvelope& e) {
      try {
        broker.submit(e);
      } catch (const http::ServiceError& err) {
        return err.status();
      }
      return 200;
    };
    CHECK(status_of(envelope("s", "A", vectors(3, 9))) == 409);
    CHECK(status_of(envelope("s", "B", vectors(3, 9), 0.5)) == 409);
    auto wrong_digest = envelope("s", "B", vectors(3, 9));
    wrong_digest.config.scheme_digest = "other";
    CHECK(status_of(wrong_digest) == 409);
    auto no_digest = envelope("s", "B", vectors(3, 9));
    no_digest.config.scheme_digest.reset();
    CHECK(status_of(no_digest) == 400);
    CHECK(status_of(envelope("s", "B", vectors(3, 9, 64))) == 400);
    auto mixed = envelope("s", "B", vectors(3, 9));
    mixed.vectors.push_back(BitVector(64));
    CHECK(status_of(mixed) == 400);
    CHECK(status_of(envelope("s", "B", {})) == 400);
    CHECK(status_of(envelope("s", "B", vectors(3, 9))) == 200);
  }

  TEST_CASE("unknown sessions and clients are 404") {
    Broker broker;
    CHECK_THROWS_AS(broker.progress("nope"), http::ServiceError);
    broker.submit(envelope("s", "A", vectors(2, 1)));
    try {
      broker.results("s", "Z", true);
      FAIL("expected 404");
    } catch (const http::ServiceError& e) {
      CHECK(e.status() == 404);
    }
  }

  TEST_CASE("idle sessions expire") {
    BrokerOptions options;
    options.session_ttl = std::chrono::seconds(1);
    Broker broker(options);
    broker.submit(envelope("s", "A", vectors(2, 1)));
    std::this_thread::sleep_for(std::chrono::milliseconds(1100));
    CHECK(broker.expire_idle() == 1);
    CHECK_THROWS_AS(broker.progress("s"), http::ServiceError);
  }

  TEST_CASE("snapshot survives a restart") {
    testing::TempDir dir;
    BrokerOptions options;
    options.snapshot_path = dir.path() / "broker.json";
    const auto a = vectors(4, 1);
    auto b = vectors(4, 50);
    b[2] = a[1];
    std::vector<StoredMatch> before;
    {
      Broker broker(options);
      broker.submit(envelope("s", "A", a, 0.8, 2));
      broker.submit(envelope("s", "B", b, 0.8, 2));
      broker.wait_idle();
      before = broker.stored_matches("s");
      CHECK(broker.progress("s").complete);
    }
    Broker restored(options);
    CHECK(restored.stored_matches("s") == before);
    CHECK(restored.progress("s").complete);
    CHECK(restored.results("s", "B").matches.size() == 1);
  }

  TEST_CASE("http routes") {
    testing::ServiceStack stack({});
    const auto url = stack.broker_url();
    CHECK(http::get(url, "/health").status == 200);
    CHECK(http::get(url, "/sessions/x/progress").status == 404);
    const auto e = envelope("h", "A", vectors(2, 1));
    CHECK(http::post(url, "/sessions/h/submissions", protocol::serialize(e)).status == 200);
    CHECK(http::post(url, "/sessions/other/submissions", protocol::serialize(e)).status == 400);
    CHECK(http::post(url, "/sessions/h/submissions", "{").status == 400);
    CHECK(http::get(url, "/sessions/h/results").status == 400);
    CHECK(http::get(url, "/sessions/h/results", {{"client", "A"}}).status == 409);
    const auto forced = http::get(url, "/sessions/h/results", {{"client", "A"}, {"force", "true"}});
    CHECK(forced.status == 200);
    CHECK(protocol::deserialize<protocol::MatchResultForClient>(forced.body).matches.empty());
    const auto progress = protocol::deserialize<protocol::SessionProgress>(
        http::get(url, "/sessions/h/progress").body);
    CHECK(progress.submitted_clients == 1);
  }
}

TEST_SUITE("resolver") {
  TEST_CASE("csv index store") {
    const auto store = CsvMpiStore::parse(kMpi);
    CHECK(store.size() == 3);
    const auto r = store.lookup("P-1");
    REQUIRE(r.has_value());
    CHECK(*r == anna());
    CHECK_FALSE(store.lookup("P-missing").has_value());
    try {
      (void)CsvMpiStore::parse(std::string(kMpi) + "P-4,Only,Three\n");
      FAIL("expected a parse error");
    } catch (const csv::ParseError& e) {
      CHECK(e.line() == 5);
    }
    CHECK_THROWS_AS(CsvMpiStore::parse(std::string(kMpi) + "P-1,A,B,F,2000-01-01,C\n"),
                    csv::ParseError);
    CHECK_THROWS_AS(CsvMpiStore::parse("pseudonym,name\nP,x\n"), csv::ParseError);
  }

  TEST_CASE("lenient submission reports unresolved pseudonyms") {
    testing::ServiceStack stack({.mpi_csvs = {kMpi}});
    const auto r = http::post(stack.resolver_url(0), "/sessions",
                              submission_body("s1", {"P-1", "P-2", "P-unknown"}).dump());
    REQUIRE(r.status == 200);
    const auto receipt = body_of(r);
    CHECK(receipt.at("resolved") == 2);
    CHECK(receipt.at("unresolved") == 1);
    CHECK(receipt.at("unresolved_pseudonyms") == json::array({"P-unknown"}));
    CHECK(receipt.at("broker").at("stored") == 2);
    const auto binding = stack.resolver(0).binding("s1");
    REQUIRE(binding.has_value());
    CHECK(binding->pseudonym_order == std::vector<std::string>{"P-1", "P-2"});
    CHECK(binding->client_id == receipt.at("client_id"));

    // the duplicate rule
    CHECK(http::post(stack.resolver_url(0), "/sessions",
                     submission_body("s1", {"P-1"}).dump())
              .status == 409);
  }

  TEST_CASE("strict mode and nothing resolvable are 422") {
    testing::ServiceStack strict({.mpi_csvs = {kMpi}, .strict = true});
    CHECK(http::post(strict.resolver_url(0), "/sessions",
                     submission_body("s", {"P-1", "P-x"}).dump())
              .status == 422);
    CHECK_FALSE(strict.resolver(0).binding("s").has_value());
    testing::ServiceStack lenient({.mpi_csvs = {kMpi}});
    CHECK(http::post(lenient.resolver_url(0), "/sessions",
                     submission_body("s", {"P-x"}).dump())
              .status == 422);
    CHECK(http::post(lenient.resolver_url(0), "/sessions", submission_body("s", {}).dump())
              .status == 400);
  }

  TEST_CASE("submitted vectors are index aligned with the pseudonym order") {
    const auto scheme = testing::test_scheme();
    testing::ServiceStack stack({.scheme = scheme, .mpi_csvs = {kMpi}});
    REQUIRE(http::post(stack.resolver_url(0), "/sessions",
                       submission_body("s", {"P-3", "P-1", "P-3", "P-2"}).dump())
                .status == 200);
    const auto binding = *stack.resolver(0).binding("s");
    CHECK(binding.pseudonym_order == std::vector<std::string>{"P-3", "P-1", "P-2"});
    const auto submissions = stack.traffic().snapshot();
    const auto it = std::find_if(submissions.begin(), submissions.end(),
                                 [](const testing::Exchange& e) { return e.service == "broker"; });
    REQUIRE(it != submissions.end());
    const auto env = protocol::deserialize<protocol::SubmissionEnvelope>(it->request_body);
    const auto store = CsvMpiStore::parse(kMpi);
    REQUIRE(env.vectors.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(env.vectors[i] == encode(*store.lookup(binding.pseudonym_order[i]), scheme));
    }
    CHECK(env.config.scheme_digest == protocol::scheme_digest(scheme));
  }

  TEST_CASE("results map indices back to pseudonyms") {
    testing::ServiceStack stack({.mpi_csvs = {kMpi, kMpiPeer}});
    const auto a = body_of(http::post(stack.resolver_url(0), "/sessions",
                                      submission_body("s", {"P-1", "P-2", "P-3"}, 2).dump()));
    const auto b = body_of(http::post(stack.resolver_url(1), "/sessions",
                                      submission_body("s", {"Q-1", "Q-2"}, 2).dump()));
    stack.broker().wait_idle();
    const auto ra = http::post(stack.resolver_url(0), "/sessions/s/results", "{}");
    REQUIRE(ra.status == 200);
    const auto matches = body_of(ra).at("matches");
    REQUIRE(matches.size() == 1);
    CHECK(matches[0].at("pseudonym") == "P-1");
    CHECK(matches[0].at("peer_client") == b.at("client_id"));
    CHECK(matches[0].at("similarity") == 1.0);
    const auto rb = body_of(http::post(stack.resolver_url(1), "/sessions/s/results", "{}"));
    CHECK(rb.at("matches")[0].at("pseudonym") == "Q-1");
    CHECK(rb.at("matches")[0].at("peer_client") == a.at("client_id"));
    CHECK(rb.at("matches")[0].at("match_id") == matches[0].at("match_id"));
    CHECK(http::post(stack.resolver_url(0), "/sessions/unknown/results", "{}").status == 404);
  }

  TEST_CASE("incomplete sessions are 409 unless forced; empty results are fine") {
    testing::ServiceStack stack({.mpi_csvs = {kMpi}});
    REQUIRE(http::post(stack.resolver_url(0), "/sessions",
                       submission_body("s", {"P-2"}, 2).dump())
                .status == 200);
    const auto pending = http::post(stack.resolver_url(0), "/sessions/s/results", "{}");
    CHECK(pending.status == 409);
    CHECK(body_of(pending).at("progress").at("expected_clients") == 2);
    const auto forced =
        http::post(stack.resolver_url(0), "/sessions/s/results", R"({"force":true})");
    CHECK(forced.status == 200);
    CHECK(body_of(forced).at("matches").empty());
  }

  TEST_CASE("unreachable peers are 502 and roll the binding back") {
    ResolverOptions options;
    options.scheme = testing::test_scheme();
    options.encoder_url = "http://127.0.0.1:1";
    options.default_broker_url = "http://127.0.0.1:1";
    options.client.timeout = std::chrono::seconds(2);
    Resolver resolver(options, std::make_shared<CsvMpiStore>(CsvMpiStore::parse(kMpi)));
    try {
      resolver.submit_session(submission_body("s", {"P-1"}));
      FAIL("expected 502");
    } catch (const http::ServiceError& e) {
      CHECK(e.status() == 502);
    }
    CHECK_FALSE(resolver.binding("s").has_value());

    testing::ServiceStack stack({.mpi_csvs = {kMpi}});
    auto body = submission_body("s", {"P-1"});
    body["broker_url"] = "http://127.0.0.1:1";
    CHECK(http::post(stack.resolver_url(0), "/sessions", body.dump()).status == 502);
    // the rolled-back session can be submitted again
    CHECK(http::post(stack.resolver_url(0), "/sessions", submission_body("s", {"P-1"}).dump())
              .status == 200);
  }

  TEST_CASE("scheme digest mismatch is 409") {
    testing::ServiceStack stack({.mpi_csvs = {kMpi}});
    auto body = submission_body("s", {"P-1"});
    body["config"]["scheme_digest"] = "0000";
    CHECK(http::post(stack.resolver_url(0), "/sessions", body.dump()).status == 409);
  }

  TEST_CASE("bindings persist across restarts") {
    testing::TempDir dir;
    const auto path = dir.path() / "bindings.jsonl";
    SessionBinding binding{"s", "c", {"P-1", "P-2"}, "http://broker", 1234};
    {
      BindingStore store(path);
      store.append(binding);
      CHECK(store.contains("s"));
    }
    BindingStore reopened(path);
    CHECK(reopened.find("s") == binding);
    CHECK_FALSE(reopened.contains("t"));
  }

  TEST_CASE("response bodies carry no quasi-identifiers") {
    testing::ServiceStack stack({.mpi_csvs = {kMpi, kMpiPeer}});
    http::post(stack.resolver_url(0), "/sessions",
               submission_body("s", {"P-1", "P-2", "P-3"}, 2).dump());
    http::post(stack.resolver_url(1), "/sessions", submission_body("s", {"Q-1", "Q-2"}, 2).dump());
    stack.broker().wait_idle();
    http::post(stack.resolver_url(0), "/sessions/s/results", "{}");
    http::post(stack.resolver_url(1), "/sessions/s/results", "{}");
    for (const auto& e : stack.traffic().snapshot()) {
      if (e.service.rfind("resolver", 0) != 0) continue;
      for (const std::string qid : {"Anna", "Schmidt", "Leipzig", "1990-04-12", "Jonas", "Weber",
                                    "Bremen", "Fischer", "Kiel", "Wagner", "Dresden"}) {
        CHECK(e.response_body.find(qid) == std::string::npos);
      }
    }
  }
}
