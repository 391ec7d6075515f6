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

// Central linkage unit: session registry, vector intake, incremental
// cross-client matching on a worker pool, progress and per-client results.

#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "pprl/http.hpp"
#include "pprl/protocol.hpp"
#include "pprl/worker_pool.hpp"

namespace pprl {

struct StoredMatch {
  std::string client_a;  // the earlier-registered client
  std::size_t index_a = 0;
  std::string client_b;
  std::size_t index_b = 0;
  double similarity = 0.0;
  std::string match_id;

  friend bool operator==(const StoredMatch&, const StoredMatch&) = default;
};

struct BrokerOptions {
  unsigned parallelism = 1;
  std::chrono::seconds session_ttl = std::chrono::hours(24);
  std::optional<std::filesystem::path> snapshot_path;
};

class Broker {
 public:
  explicit Broker(BrokerOptions options = {});
  ~Broker();
  Broker(const Broker&) = delete;
  Broker& operator=(const Broker&) = delete;

  /// Registers a client's vectors and schedules matching against every
  /// previously registered client. Returns the acknowledgment document.
  /// Throws http::ServiceError (400 / 409).
  nlohmann::json submit(const protocol::SubmissionEnvelope& envelope);

  /// Throws http::ServiceError(404) for unknown sessions.
  protocol::SessionProgress progress(const std::string& session_id);

  /// Throws 404 for unknown session/client, 409 (with a progress payload)
  /// while the session is incomplete unless `force` is set.
  protocol::MatchResultForClient results(const std::string& session_id,
                                         const std::string& client_id,
                                         bool force = false);

  /// Every stored above-threshold pair of a session, sorted.
  std::vector<StoredMatch> stored_matches(const std::string& session_id);

  /// Blocks until all scheduled matching tasks have been merged.
  void wait_idle();

  /// Drops sessions idle for longer than the TTL; returns how many.
  std::size_t expire_idle();

  /// Registers the broker routes and GET /health.
  void mount(http::Server& server);

 private:
  struct Session;
  struct ClientVectors;

  std::shared_ptr<Session> find(const std::string& session_id);
  void schedule(const std::shared_ptr<Session>& session,
                std::shared_ptr<const ClientVectors> earlier,
                std::shared_ptr<const ClientVectors> later);
  protocol::SessionProgress progress_locked(const Session& session) const;
  void write_snapshot();
  void load_snapshot();

  BrokerOptions options_;
  std::mutex registry_mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::mutex snapshot_mutex_;
  // last member: joined first, while the sessions it touches are alive
  WorkerPool pool_;
};

}  // namespace pprl
