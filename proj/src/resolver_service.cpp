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

#include "pprl/resolver_service.hpp"

#include <chrono>
#include <fstream>

#include "pprl/crypto.hpp"
#include "pprl/csv.hpp"

namespace pprl {

using protocol::json;

// ---------------------------------------------------------------- MPI stub

const std::vector<std::string>& CsvMpiStore::header() {
  static const std::vector<std::string> columns = {
      "pseudonym", "first_name", "last_name", "gender", "birth_date", "city"};
  return columns;
}

CsvMpiStore CsvMpiStore::load(const std::filesystem::path& path) {
  return parse(csv::read_file(path));
}

CsvMpiStore CsvMpiStore::parse(std::string_view text) {
  const auto& columns = header();
  CsvMpiStore store;
  for (auto& row : csv::parse_with_header(text, columns)) {
    PersonRecord record;
    record.pseudonym = row.fields[0];
    if (record.pseudonym.empty()) {
      throw csv::ParseError(row.line, "empty pseudonym");
    }
    for (std::size_t i = 1; i < columns.size(); ++i) {
      record.attributes.emplace(columns[i], std::move(row.fields[i]));
    }
    auto key = record.pseudonym;
    if (!store.records_.emplace(std::move(key), std::move(record)).second) {
      throw csv::ParseError(row.line, "duplicate pseudonym");
    }
  }
  return store;
}

std::optional<PersonRecord> CsvMpiStore::lookup(std::string_view pseudonym) const {
  auto it = records_.find(pseudonym);
  if (it == records_.end()) return std::nullopt;
  return it->second;
}

// ---------------------------------------------------------------- bindings

namespace {

json binding_to_json(const SessionBinding& b) {
  return {{"session_id", b.session_id},
          {"client_id", b.client_id},
          {"pseudonym_order", b.pseudonym_order},
          {"broker_url", b.broker_url},
          {"created_at", b.created_at}};
}

SessionBinding binding_from_json(const json& j) {
  SessionBinding b;
  b.session_id = j.at("session_id").get<std::string>();
  b.client_id = j.at("client_id").get<std::string>();
  b.pseudonym_order = j.at("pseudonym_order").get<std::vector<std::string>>();
  b.broker_url = j.at("broker_url").get<std::string>();
  b.created_at = j.at("created_at").get<std::int64_t>();
  return b;
}

}  // namespace

BindingStore::BindingStore(std::optional<std::filesystem::path> path)
    : path_(std::move(path)) {
  if (!path_ || !std::filesystem::exists(*path_)) return;
  std::ifstream in(*path_);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      auto b = binding_from_json(json::parse(line));
      bindings_.insert_or_assign(b.session_id, std::move(b));
    } catch (const std::exception& e) {
      throw std::runtime_error("binding store " + path_->string() + " line " +
                               std::to_string(line_no) + ": " + e.what());
    }
  }
}

std::optional<SessionBinding> BindingStore::find(
    const std::string& session_id) const {
  auto it = bindings_.find(session_id);
  if (it == bindings_.end()) return std::nullopt;
  return it->second;
}

bool BindingStore::contains(const std::string& session_id) const {
  return bindings_.contains(session_id);
}

void BindingStore::append(const SessionBinding& binding) {
  if (path_) {
    if (path_->has_parent_path()) {
      std::filesystem::create_directories(path_->parent_path());
    }
    std::ofstream out(*path_, std::ios::app);
    out << binding_to_json(binding).dump() << '\n';
    out.flush();
    if (!out) throw std::runtime_error("cannot append to binding store");
  }
  bindings_.insert_or_assign(binding.session_id, binding);
}

// ---------------------------------------------------------------- resolver

namespace {

std::string error_of(const http::Response& response) {
  try {
    const auto j = json::parse(response.body);
    if (j.is_object() && j.contains("error") && j["error"].is_string()) {
      return j["error"].get<std::string>();
    }
  } catch (const json::exception&) {
  }
  return "status " + std::to_string(response.status);
}

std::string optional_string(const json& body, const char* name,
                            const std::string& fallback) {
  if (!body.is_object() || !body.contains(name) || body[name].is_null()) {
    return fallback;
  }
  if (!body[name].is_string()) {
    throw http::ServiceError(400, std::string("field '") + name +
                                      "' must be a string");
  }
  return body[name].get<std::string>();
}

}  // namespace

Resolver::Resolver(ResolverOptions options, std::shared_ptr<const MpiAdapter> mpi)
    : options_(std::move(options)),
      mpi_(std::move(mpi)),
      digest_((options_.scheme.validate(), protocol::scheme_digest(options_.scheme))),
      store_(options_.binding_store) {}

std::optional<SessionBinding> Resolver::binding(const std::string& session_id) const {
  std::lock_guard lock(mutex_);
  return store_.find(session_id);
}

std::vector<BitVector> Resolver::encode_remote(
    const std::vector<PersonRecord>& records, const std::string& encoder_url) const {
  protocol::EncodeRequest request{options_.scheme, records};
  http::Response response;
  try {
    response = http::post(encoder_url, "/encode", protocol::serialize(request),
                          options_.client);
  } catch (const http::Unreachable& e) {
    throw http::ServiceError(502, std::string("encoder unreachable: ") + e.what());
  }
  if (response.status != 200) {
    throw http::ServiceError(502, "encoder rejected request: " + error_of(response));
  }
  auto decoded = protocol::deserialize<protocol::EncodeResponse>(response.body);
  if (decoded.vectors.size() != records.size()) {
    throw http::ServiceError(502, "encoder returned a wrong vector count");
  }
  return std::move(decoded.vectors);
}

json Resolver::submit_session(const json& body) {
  if (!body.is_object()) throw http::ServiceError(400, "expected a JSON object");
  if (!body.contains("config")) throw http::ServiceError(400, "missing field 'config'");
  auto config = protocol::from_json<protocol::MatchConfig>(body["config"]);
  if (config.scheme_digest && *config.scheme_digest != digest_) {
    throw http::ServiceError(409, "scheme_digest does not match this station's scheme");
  }
  config.scheme_digest = digest_;

  if (!body.contains("pseudonyms") || !body["pseudonyms"].is_array()) {
    throw http::ServiceError(400, "field 'pseudonyms' must be an array");
  }
  std::vector<std::string> pseudonyms;
  for (const auto& p : body["pseudonyms"]) {
    if (!p.is_string()) throw http::ServiceError(400, "pseudonyms must be strings");
    pseudonyms.push_back(p.get<std::string>());
  }
  if (pseudonyms.empty()) throw http::ServiceError(400, "pseudonym list is empty");
  const auto broker_url = optional_string(body, "broker_url", options_.default_broker_url);
  const auto encoder_url = optional_string(body, "encoder_url", options_.encoder_url);
  if (broker_url.empty() || encoder_url.empty()) {
    throw http::ServiceError(400, "no broker_url or encoder_url configured");
  }

  const auto& session_id = config.session_id;
  {
    std::lock_guard lock(mutex_);
    if (store_.contains(session_id) || in_flight_.contains(session_id)) {
      throw http::ServiceError(409, "session already submitted from this station");
    }
    in_flight_.insert(session_id);
  }
  // until the binding is stored, any failure rolls the reservation back
  struct Reservation {
    Resolver* self;
    std::string id;
    ~Reservation() {
      std::lock_guard lock(self->mutex_);
      self->in_flight_.erase(id);
    }
  } reservation{this, session_id};

  std::vector<PersonRecord> records;
  std::vector<std::string> order;
  std::vector<std::string> unresolved;
  std::set<std::string> seen;
  for (const auto& p : pseudonyms) {
    if (!seen.insert(p).second) continue;  // a pseudonym is submitted once
    if (auto record = mpi_->lookup(p)) {
      records.push_back(std::move(*record));
      order.push_back(p);
    } else {
      unresolved.push_back(p);
    }
  }
  if (options_.strict && !unresolved.empty()) {
    throw http::ServiceError(
        422, std::to_string(unresolved.size()) + " pseudonyms could not be resolved",
        {{"unresolved_pseudonyms", unresolved}});
  }
  if (records.empty()) {
    throw http::ServiceError(422, "none of the pseudonyms could be resolved",
                             {{"unresolved_pseudonyms", unresolved}});
  }

  protocol::SubmissionEnvelope envelope;
  envelope.session_id = session_id;
  envelope.client_id = crypto::random_uuid();
  envelope.config = config;
  envelope.vectors = encode_remote(records, encoder_url);
  records.clear();

  http::Response ack;
  try {
    ack = http::post(broker_url, "/sessions/" + session_id + "/submissions",
                     protocol::serialize(envelope), options_.client);
  } catch (const http::Unreachable& e) {
    throw http::ServiceError(502, std::string("broker unreachable: ") + e.what());
  }
  if (ack.status != 200) {
    const int status = ack.status >= 400 && ack.status < 500 ? ack.status : 502;
    throw http::ServiceError(status, "broker rejected submission: " + error_of(ack));
  }

  SessionBinding binding{session_id, envelope.client_id, order, broker_url,
                         std::chrono::duration_cast<std::chrono::seconds>(
                             std::chrono::system_clock::now().time_since_epoch())
                             .count()};
  {
    std::lock_guard lock(mutex_);
    store_.append(binding);
  }

  json broker_ack = json::object();
  try {
    broker_ack = json::parse(ack.body);
  } catch (const json::exception&) {
  }
  return {{"session_id", session_id},
          {"client_id", envelope.client_id},
          {"resolved", order.size()},
          {"unresolved", unresolved.size()},
          {"unresolved_pseudonyms", unresolved},
          {"broker", broker_ack}};
}

json Resolver::fetch_results(const std::string& session_id, const json& body) {
  bool force = false;
  if (body.is_object() && body.contains("force")) {
    if (!body["force"].is_boolean()) {
      throw http::ServiceError(400, "field 'force' must be a boolean");
    }
    force = body["force"].get<bool>();
  }
  const auto binding = this->binding(session_id);
  if (!binding) throw http::ServiceError(404, "unknown session");

  std::map<std::string, std::string> query = {{"client", binding->client_id}};
  if (force) query["force"] = "true";
  http::Response response;
  try {
    response = http::get(binding->broker_url, "/sessions/" + session_id + "/results",
                         query, options_.client);
  } catch (const http::Unreachable& e) {
    throw http::ServiceError(502, std::string("broker unreachable: ") + e.what());
  }
  if (response.status == 409) {
    json extra = json::object();
    try {
      auto j = json::parse(response.body);
      if (j.contains("progress")) extra["progress"] = j["progress"];
    } catch (const json::exception&) {
    }
    throw http::ServiceError(409, "session incomplete at the broker", extra);
  }
  if (response.status == 404) {
    throw http::ServiceError(404, "broker does not know this session: " +
                                      error_of(response));
  }
  if (response.status != 200) {
    throw http::ServiceError(502, "broker error: " + error_of(response));
  }
  const auto result = protocol::deserialize<protocol::MatchResultForClient>(response.body);

  json matches = json::array();
  for (const auto& m : result.matches) {
    if (m.local_index >= binding->pseudonym_order.size()) {
      throw http::ServiceError(502, "broker returned an out-of-range vector index");
    }
    matches.push_back({{"pseudonym", binding->pseudonym_order[m.local_index]},
                       {"peer_client", m.peer_client_id},
                       {"similarity", m.similarity},
                       {"match_id", m.match_id}});
  }
  return {{"session_id", session_id}, {"matches", std::move(matches)}};
}

void Resolver::mount(http::Server& server) {
  server.route("POST", "/sessions", [this](const http::Request& req) {
    return http::json_response(submit_session(protocol::parse(req.body)));
  });
  server.route("POST", R"(/sessions/([^/]+)/results)",
               [this](const http::Request& req) {
                 const json body =
                     req.body.empty() ? json::object() : protocol::parse(req.body);
                 return http::json_response(fetch_results(req.captures.at(0), body));
               });
  server.route("GET", "/health", [](const http::Request&) {
    return http::json_response({{"status", "ok"}, {"service", "resolver"}});
  });
}

}  // namespace pprl
