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

// The analyst-side driver: submits a session at every station, waits for the
// broker, collects the pseudonymized results and writes per-station reports.

#pragma once

#include <chrono>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pprl/http.hpp"
#include "pprl/protocol.hpp"

namespace pprl::train {

struct Station {
  std::string name;
  std::string resolver_url;
  std::filesystem::path pseudonym_file;
};

struct TrainPlan {
  protocol::MatchConfig session;  // session_id may be empty: generated on submit
  std::vector<Station> stations;
  std::string broker_url;
  std::filesystem::path output_dir;
  bool strict = false;  // first station failure aborts the run

  /// Relative paths resolve against `base_dir`. Throws std::invalid_argument.
  static TrainPlan from_json(const nlohmann::json& j,
                             const std::filesystem::path& base_dir = {});
  static TrainPlan load(const std::filesystem::path& path);
  void validate() const;
};

/// One pseudonym per line; blank lines and surrounding whitespace ignored.
std::vector<std::string> read_pseudonyms(const std::filesystem::path& path);

struct StationSubmission {
  std::string name;
  bool ok = false;
  int http_status = 0;  // 0 when the resolver was unreachable
  std::string error;
  std::string client_id;
  std::uint64_t resolved = 0;
  std::uint64_t unresolved = 0;
};

struct SubmitReport {
  std::string session_id;
  std::vector<StationSubmission> stations;

  nlohmann::json to_json() const;
  static SubmitReport from_json(const nlohmann::json& j);
  static std::filesystem::path path_in(const std::filesystem::path& output_dir);
};

/// One row of a station's result CSV (pseudonym,peer_client,similarity).
/// peer_client is the peer's station name.
struct ResultRow {
  std::string pseudonym;
  std::string peer_client;
  double similarity = 0.0;
  std::string match_id;

  friend auto operator<=>(const ResultRow&, const ResultRow&) = default;
};

std::string format_results_csv(std::vector<ResultRow> rows);
/// pseudonym,peer_client,similarity,match_id: lets an evaluator re-join both sides of a pair.
std::string format_links_csv(std::vector<ResultRow> rows);

enum ExitCode : int { kSuccess = 0, kPartialFailure = 1, kHardFailure = 2 };

struct RunOptions {
  std::chrono::milliseconds poll_interval{1000};
  std::chrono::milliseconds timeout{std::chrono::minutes(10)};
  http::ClientOptions client;
};

/// Phase 1: visits the stations in plan order and writes submit_report.json.
int run_submit(const TrainPlan& plan, const RunOptions& options, std::ostream& log);

/// Phase 2: waits for the broker session, fetches every station's results
/// and writes <station>.csv and <station>.links.csv.
int run_results(const TrainPlan& plan, const RunOptions& options, std::ostream& log);

/// Both phases in one invocation with concurrent submissions. Requires
/// session.expected_clients.
int run_federated(const TrainPlan& plan, const RunOptions& options, std::ostream& log);

}  // namespace pprl::train
