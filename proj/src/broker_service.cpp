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

#include "pprl/broker_service.hpp"

#include <algorithm>
#include <set>

#include "pprl/crypto.hpp"
#include "pprl/csv.hpp"
#include "pprl/matcher.hpp"

namespace pprl {

using protocol::json;
using Clock = std::chrono::steady_clock;

struct Broker::ClientVectors {
  std::string client_id;
  std::vector<BitVector> vectors;
};

struct Broker::Session {
  std::mutex mutex;
  protocol::MatchConfig config;
  std::size_t vector_length = 0;
  std::vector<std::shared_ptr<const ClientVectors>> clients;
  std::vector<StoredMatch> matches;
  std::set<std::pair<std::string, std::string>> matched_client_pairs;
  std::uint64_t comparisons_done = 0;
  std::size_t pending_tasks = 0;
  Clock::time_point last_activity = Clock::now();

  const ClientVectors* client(const std::string& id) const {
    for (const auto& c : clients) {
      if (c->client_id == id) return c.get();
    }
    return nullptr;
  }
};

namespace {

std::string make_match_id(const std::string& session_id, const StoredMatch& m) {
  std::string key = session_id;
  for (const auto& part :
       {m.client_a, std::to_string(m.index_a), m.client_b,
        std::to_string(m.index_b)}) {
    key.push_back('\0');
    key += part;
  }
  return crypto::to_hex(crypto::sha256(key)).substr(0, 24);
}

http::ServiceError not_found(const std::string& what) {
  return http::ServiceError(404, what);
}

}  // namespace

Broker::Broker(BrokerOptions options)
    : options_(std::move(options)), pool_(std::max(1U, options_.parallelism)) {
  if (options_.snapshot_path && std::filesystem::exists(*options_.snapshot_path)) {
    load_snapshot();
  }
}

Broker::~Broker() { pool_.wait_idle(); }

std::shared_ptr<Broker::Session> Broker::find(const std::string& session_id) {
  std::lock_guard lock(registry_mutex_);
  auto it = sessions_.find(session_id);
  return it == sessions_.end() ? nullptr : it->second;
}

json Broker::submit(const protocol::SubmissionEnvelope& envelope) {
  expire_idle();
  const auto& config = envelope.config;
  if (!config.scheme_digest || config.scheme_digest->empty()) {
    throw http::ServiceError(400, "submission lacks scheme_digest");
  }
  if (envelope.vectors.empty()) {
    throw http::ServiceError(400, "submission carries no vectors");
  }
  const std::size_t length = envelope.vectors.front().size();
  for (const auto& v : envelope.vectors) {
    if (v.size() != length) {
      throw http::ServiceError(400, "submission mixes vector lengths");
    }
  }

  std::shared_ptr<Session> session;
  {
    std::lock_guard lock(registry_mutex_);
    auto& slot = sessions_[envelope.session_id];
    if (!slot) {
      slot = std::make_shared<Session>();
      slot->config = config;
      slot->vector_length = length;
    }
    session = slot;
  }

  std::vector<std::shared_ptr<const ClientVectors>> earlier;
  auto incoming = std::make_shared<const ClientVectors>(
      ClientVectors{envelope.client_id, envelope.vectors});
  {
    std::lock_guard lock(session->mutex);
    const auto& established = session->config;
    if (established.threshold != config.threshold) {
      throw http::ServiceError(409, "threshold differs from the session's");
    }
    if (established.scheme_digest != config.scheme_digest) {
      throw http::ServiceError(409, "scheme_digest differs from the session's");
    }
    if (established.expected_clients != config.expected_clients) {
      throw http::ServiceError(409,
                               "expected_clients differs from the session's");
    }
    if (session->client(envelope.client_id) != nullptr) {
      throw http::ServiceError(409, "client_id already registered in session");
    }
    if (length != session->vector_length) {
      throw http::ServiceError(
          400, "vector length " + std::to_string(length) +
                   " differs from the session's " +
                   std::to_string(session->vector_length));
    }
    if (established.expected_clients &&
        session->clients.size() >= *established.expected_clients) {
      throw http::ServiceError(409, "session already has all expected clients");
    }
    earlier = session->clients;
    session->clients.push_back(incoming);
    session->pending_tasks += earlier.size();
    session->last_activity = Clock::now();
  }

  std::uint64_t scheduled = 0;
  for (const auto& prior : earlier) {
    scheduled += prior->vectors.size() * incoming->vectors.size();
    schedule(session, prior, incoming);
  }
  write_snapshot();
  return {{"session_id", envelope.session_id},
          {"client_id", envelope.client_id},
          {"stored", envelope.vectors.size()},
          {"scheduled_comparisons", scheduled}};
}

void Broker::schedule(const std::shared_ptr<Session>& session,
                      std::shared_ptr<const ClientVectors> earlier,
                      std::shared_ptr<const ClientVectors> later) {
  pool_.post([this, session, earlier = std::move(earlier),
              later = std::move(later)] {
    double threshold = 0.0;
    std::string session_id;
    {
      std::lock_guard lock(session->mutex);
      threshold = session->config.threshold;
      session_id = session->config.session_id;
    }
    MatchTask task{session_id, earlier->client_id, later->client_id,
                   earlier->vectors, later->vectors, threshold};
    std::vector<StoredMatch> found;
    for (auto& pair : match_pairwise(task)) {
      StoredMatch m{pair.left.client_id, pair.left.index, pair.right.client_id,
                    pair.right.index, pair.similarity, {}};
      m.match_id = make_match_id(session_id, m);
      found.push_back(std::move(m));
    }
    {
      // merged in one critical section: readers never see a partial pair set
      std::lock_guard lock(session->mutex);
      session->matches.insert(session->matches.end(),
                              std::make_move_iterator(found.begin()),
                              std::make_move_iterator(found.end()));
      session->matched_client_pairs.emplace(earlier->client_id,
                                            later->client_id);
      session->comparisons_done +=
          earlier->vectors.size() * later->vectors.size();
      --session->pending_tasks;
      session->last_activity = Clock::now();
    }
    write_snapshot();
  });
}

protocol::SessionProgress Broker::progress_locked(const Session& session) const {
  protocol::SessionProgress p;
  p.session_id = session.config.session_id;
  p.submitted_clients = session.clients.size();
  p.expected_clients = session.config.expected_clients;
  p.comparisons_done = session.comparisons_done;
  const std::size_t n = session.clients.size();
  const std::size_t all_pairs = n * (n - (n > 0 ? 1 : 0)) / 2;
  p.complete = session.config.expected_clients &&
               n == *session.config.expected_clients &&
               session.matched_client_pairs.size() == all_pairs &&
               session.pending_tasks == 0;
  return p;
}

protocol::SessionProgress Broker::progress(const std::string& session_id) {
  expire_idle();
  auto session = find(session_id);
  if (!session) throw not_found("unknown session");
  std::lock_guard lock(session->mutex);
  session->last_activity = Clock::now();
  return progress_locked(*session);
}

protocol::MatchResultForClient Broker::results(const std::string& session_id,
                                               const std::string& client_id,
                                               bool force) {
  expire_idle();
  auto session = find(session_id);
  if (!session) throw not_found("unknown session");
  std::lock_guard lock(session->mutex);
  session->last_activity = Clock::now();
  if (session->client(client_id) == nullptr) {
    throw not_found("client not registered in session");
  }
  const auto progress = progress_locked(*session);
  if (!progress.complete && !force) {
    throw http::ServiceError(409, "session incomplete",
                             {{"progress", protocol::to_json(progress)}});
  }
  protocol::MatchResultForClient out;
  out.session_id = session_id;
  out.client_id = client_id;
  for (const auto& m : session->matches) {
    if (m.client_a == client_id) {
      out.matches.push_back({m.index_a, m.client_b, m.similarity, m.match_id});
    } else if (m.client_b == client_id) {
      out.matches.push_back({m.index_b, m.client_a, m.similarity, m.match_id});
    }
  }
  std::sort(out.matches.begin(), out.matches.end(),
            [](const protocol::MatchEntry& x, const protocol::MatchEntry& y) {
              return std::tie(x.local_index, x.peer_client_id, x.match_id) <
                     std::tie(y.local_index, y.peer_client_id, y.match_id);
            });
  return out;
}

std::vector<StoredMatch> Broker::stored_matches(const std::string& session_id) {
  auto session = find(session_id);
  if (!session) throw not_found("unknown session");
  std::vector<StoredMatch> out;
  {
    std::lock_guard lock(session->mutex);
    out = session->matches;
  }
  std::sort(out.begin(), out.end(), [](const StoredMatch& x, const StoredMatch& y) {
    return std::tie(x.client_a, x.index_a, x.client_b, x.index_b) <
           std::tie(y.client_a, y.index_a, y.client_b, y.index_b);
  });
  return out;
}

void Broker::wait_idle() { pool_.wait_idle(); }

std::size_t Broker::expire_idle() {
  const auto now = Clock::now();
  std::size_t removed = 0;
  {
    std::lock_guard lock(registry_mutex_);
    for (auto it = sessions_.begin(); it != sessions_.end();) {
      bool expired = false;
      {
        std::lock_guard session_lock(it->second->mutex);
        expired = it->second->pending_tasks == 0 &&
                  now - it->second->last_activity > options_.session_ttl;
      }
      if (expired) {
        it = sessions_.erase(it);
        ++removed;
      } else {
        ++it;
      }
    }
  }
  if (removed > 0) write_snapshot();
  return removed;
}

// ---------------------------------------------------------------- snapshot

void Broker::write_snapshot() {
  if (!options_.snapshot_path) return;
  std::lock_guard snapshot_lock(snapshot_mutex_);
  std::vector<std::shared_ptr<Session>> sessions;
  {
    std::lock_guard lock(registry_mutex_);
    for (const auto& [id, s] : sessions_) sessions.push_back(s);
  }
  json doc = {{"sessions", json::array()}};
  for (const auto& s : sessions) {
    std::lock_guard lock(s->mutex);
    json clients = json::array();
    for (const auto& c : s->clients) {
      json vectors = json::array();
      for (const auto& v : c->vectors) vectors.push_back(protocol::to_json(v));
      clients.push_back({{"client_id", c->client_id}, {"vectors", vectors}});
    }
    json matches = json::array();
    for (const auto& m : s->matches) {
      matches.push_back({m.client_a, m.index_a, m.client_b, m.index_b,
                         m.similarity, m.match_id});
    }
    json pairs = json::array();
    for (const auto& [a, b] : s->matched_client_pairs) pairs.push_back({a, b});
    doc["sessions"].push_back({{"config", protocol::to_json(s->config)},
                               {"vector_length", s->vector_length},
                               {"clients", std::move(clients)},
                               {"matches", std::move(matches)},
                               {"matched_client_pairs", std::move(pairs)}});
  }
  const auto& path = *options_.snapshot_path;
  auto tmp = path;
  tmp += ".tmp";
  csv::write_file(tmp, doc.dump());
  std::filesystem::rename(tmp, path);
}

void Broker::load_snapshot() {
  const auto doc = protocol::parse(csv::read_file(*options_.snapshot_path));
  std::vector<std::tuple<std::shared_ptr<Session>,
                         std::shared_ptr<const ClientVectors>,
                         std::shared_ptr<const ClientVectors>>>
      unfinished;
  for (const auto& entry : doc.at("sessions")) {
    auto s = std::make_shared<Session>();
    s->config = protocol::from_json<protocol::MatchConfig>(entry.at("config"));
    s->vector_length = entry.at("vector_length").get<std::size_t>();
    for (const auto& c : entry.at("clients")) {
      ClientVectors cv{c.at("client_id").get<std::string>(), {}};
      for (const auto& v : c.at("vectors")) {
        cv.vectors.push_back(protocol::from_json<BitVector>(v));
      }
      s->clients.push_back(std::make_shared<const ClientVectors>(std::move(cv)));
    }
    for (const auto& m : entry.at("matches")) {
      s->matches.push_back({m.at(0).get<std::string>(), m.at(1).get<std::size_t>(),
                            m.at(2).get<std::string>(), m.at(3).get<std::size_t>(),
                            m.at(4).get<double>(), m.at(5).get<std::string>()});
    }
    for (const auto& p : entry.at("matched_client_pairs")) {
      s->matched_client_pairs.emplace(p.at(0).get<std::string>(),
                                      p.at(1).get<std::string>());
    }
    for (std::size_t i = 0; i < s->clients.size(); ++i) {
      for (std::size_t j = i + 1; j < s->clients.size(); ++j) {
        const auto& a = s->clients[i];
        const auto& b = s->clients[j];
        if (s->matched_client_pairs.contains({a->client_id, b->client_id})) {
          s->comparisons_done += a->vectors.size() * b->vectors.size();
        } else {
          ++s->pending_tasks;
          unfinished.emplace_back(s, a, b);
        }
      }
    }
    sessions_[s->config.session_id] = s;
  }
  for (auto& [s, a, b] : unfinished) schedule(s, a, b);
}

// ---------------------------------------------------------------- routes

void Broker::mount(http::Server& server) {
  server.route("POST", R"(/sessions/([^/]+)/submissions)",
               [this](const http::Request& req) {
                 auto envelope =
                     protocol::deserialize<protocol::SubmissionEnvelope>(req.body);
                 if (envelope.session_id != req.captures.at(0)) {
                   throw http::ServiceError(
                       400, "envelope session_id differs from the URL");
                 }
                 return http::json_response(submit(envelope));
               });
  server.route("GET", R"(/sessions/([^/]+)/progress)",
               [this](const http::Request& req) {
                 return http::json_response(
                     protocol::to_json(progress(req.captures.at(0))));
               });
  server.route("GET", R"(/sessions/([^/]+)/results)",
               [this](const http::Request& req) {
                 auto it = req.query.find("client");
                 if (it == req.query.end() || it->second.empty()) {
                   throw http::ServiceError(400, "missing client query parameter");
                 }
                 const auto f = req.query.find("force");
                 const bool force = f != req.query.end() &&
                                    (f->second == "true" || f->second == "1");
                 return http::json_response(protocol::to_json(
                     results(req.captures.at(0), it->second, force)));
               });
  server.route("GET", "/health", [](const http::Request&) {
    return http::json_response({{"status", "ok"}, {"service", "broker"}});
  });
}

}  // namespace pprl
