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

// Station-side orchestration: pseudonym lookup in the patient index,
// encoding through the encoder service, submission to the broker, and
// translation of broker results back to pseudonyms.

#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "pprl/http.hpp"
#include "pprl/masking.hpp"
#include "pprl/protocol.hpp"

namespace pprl {

/// Read-only view of a station's master patient index.
class MpiAdapter {
 public:
  virtual ~MpiAdapter() = default;
  virtual std::optional<PersonRecord> lookup(std::string_view pseudonym) const = 0;
};

/// File-backed index: CSV with header
/// pseudonym,first_name,last_name,gender,birth_date,city.
class CsvMpiStore final : public MpiAdapter {
 public:
  /// Throws csv::ParseError naming the offending line.
  static CsvMpiStore load(const std::filesystem::path& path);
  static CsvMpiStore parse(std::string_view text);

  std::optional<PersonRecord> lookup(std::string_view pseudonym) const override;
  std::size_t size() const noexcept { return records_.size(); }

  static const std::vector<std::string>& header();

 private:
  std::map<std::string, PersonRecord, std::less<>> records_;
};

struct SessionBinding {
  std::string session_id;
  std::string client_id;
  std::vector<std::string> pseudonym_order;  // index i <-> submitted vector i
  std::string broker_url;
  std::int64_t created_at = 0;  // unix seconds

  friend bool operator==(const SessionBinding&, const SessionBinding&) = default;
};

/// Append-only JSON-lines log of bindings; in-memory only without a path.
class BindingStore {
 public:
  explicit BindingStore(std::optional<std::filesystem::path> path = std::nullopt);

  std::optional<SessionBinding> find(const std::string& session_id) const;
  bool contains(const std::string& session_id) const;
  /// Persists and indexes a new binding. Caller guarantees uniqueness.
  void append(const SessionBinding& binding);

 private:
  std::optional<std::filesystem::path> path_;
  std::map<std::string, SessionBinding> bindings_;
};

struct ResolverOptions {
  EncodingScheme scheme;
  std::string encoder_url;
  std::string default_broker_url;
  bool strict = false;  // unresolved pseudonyms fail the submission
  std::optional<std::filesystem::path> binding_store;
  http::ClientOptions client;
};

class Resolver {
 public:
  Resolver(ResolverOptions options, std::shared_ptr<const MpiAdapter> mpi);

  /// POST /sessions. Returns the submission receipt; throws
  /// http::ServiceError (400, 409, 422, 502 or the broker's rejection status).
  nlohmann::json submit_session(const nlohmann::json& body);

  /// POST /sessions/{id}/results; `body` may carry {"force": true}.
  nlohmann::json fetch_results(const std::string& session_id,
                               const nlohmann::json& body);

  std::optional<SessionBinding> binding(const std::string& session_id) const;
  const std::string& scheme_digest() const noexcept { return digest_; }

  /// Registers the resolver routes and GET /health.
  void mount(http::Server& server);

 private:
  std::vector<BitVector> encode_remote(const std::vector<PersonRecord>& records,
                                       const std::string& encoder_url) const;

  ResolverOptions options_;
  std::shared_ptr<const MpiAdapter> mpi_;
  std::string digest_;
  mutable std::mutex mutex_;
  BindingStore store_;
  std::set<std::string> in_flight_;
};

}  // namespace pprl
