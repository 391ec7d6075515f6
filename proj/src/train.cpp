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

#include "pprl/train.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <fmt/format.h>

#include "pprl/crypto.hpp"
#include "pprl/csv.hpp"

namespace pprl::train {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path resolve_path(const fs::path& p, const fs::path& base_dir) {
  return p.is_relative() && !base_dir.empty() ? base_dir / p : p;
}

std::string error_message(const http::Response& response) {
  try {
    const auto j = json::parse(response.body);
    if (j.is_object() && j.contains("error") && j["error"].is_string()) {
      return j["error"].get<std::string>();
    }
  } catch (const json::exception&) {
  }
  return response.body.substr(0, 200);
}

StationSubmission submit_station(const Station& station,
                                 const protocol::MatchConfig& config,
                                 const std::string& broker_url,
                                 const RunOptions& options) {
  StationSubmission s;
  s.name = station.name;
  std::vector<std::string> pseudonyms;
  try {
    pseudonyms = read_pseudonyms(station.pseudonym_file);
  } catch (const std::exception& e) {
    s.error = e.what();
    return s;
  }
  const json body = {{"config", protocol::to_json(config)},
                     {"pseudonyms", pseudonyms},
                     {"broker_url", broker_url}};
  http::Response response;
  try {
    response = http::post(station.resolver_url, "/sessions", body.dump(), options.client);
  } catch (const http::Unreachable& e) {
    s.error = std::string("resolver unreachable: ") + e.what();
    return s;
  }
  s.http_status = response.status;
  if (response.status != 200) {
    s.error = error_message(response);
    return s;
  }
  try {
    const auto receipt = json::parse(response.body);
    s.client_id = receipt.at("client_id").get<std::string>();
    s.resolved = receipt.at("resolved").get<std::uint64_t>();
    s.unresolved = receipt.at("unresolved").get<std::uint64_t>();
    s.ok = true;
  } catch (const json::exception& e) {
    s.error = std::string("malformed receipt: ") + e.what();
  }
  return s;
}

void log_submission(std::ostream& log, const StationSubmission& s) {
  if (s.ok) {
    log << fmt::format("{}: submitted, {} resolved, {} unresolved\n", s.name, s.resolved,
                       s.unresolved);
  } else {
    log << fmt::format("{}: FAILED ({}{})\n", s.name,
                       s.http_status ? fmt::format("HTTP {}: ", s.http_status) : "", s.error);
  }
}

std::string session_id_for(const TrainPlan& plan) {
  return plan.session.session_id.empty() ? crypto::random_uuid() : plan.session.session_id;
}

void write_report(const TrainPlan& plan, const SubmitReport& report) {
  fs::create_directories(plan.output_dir);
  csv::write_file(SubmitReport::path_in(plan.output_dir), report.to_json().dump(2) + "\n");
}

int submission_exit_code(const SubmitReport& report) {
  const auto ok = std::count_if(report.stations.begin(), report.stations.end(),
                                [](const StationSubmission& s) { return s.ok; });
  if (ok == static_cast<std::ptrdiff_t>(report.stations.size())) return kSuccess;
  return ok == 0 ? kHardFailure : kPartialFailure;
}

std::string progress_text(const std::optional<protocol::SessionProgress>& p) {
  if (!p) return "no progress reported";
  return fmt::format("submitted {}, expected {}, comparisons {}, complete {}",
                     p->submitted_clients,
                     p->expected_clients ? std::to_string(*p->expected_clients) : "unset",
                     p->comparisons_done, p->complete);
}

struct WaitOutcome {
  bool done = false;
  bool force = false;  // session has no expected_clients; results need force
  std::optional<protocol::SessionProgress> last;
};

// Without expected_clients the broker never declares the session complete;
// the train then knows what to expect from its own phase-1 report.
WaitOutcome wait_for_session(const TrainPlan& plan, const SubmitReport& report,
                             const RunOptions& options, std::ostream& log) {
  std::uint64_t clients = 0;
  std::uint64_t comparisons = 0;
  std::vector<std::uint64_t> sizes;
  for (const auto& s : report.stations) {
    if (!s.ok) continue;
    ++clients;
    for (auto n : sizes) comparisons += n * s.resolved;
    sizes.push_back(s.resolved);
  }
  WaitOutcome out;
  out.force = !plan.session.expected_clients.has_value();
  const auto deadline = std::chrono::steady_clock::now() + options.timeout;
  const auto path = "/sessions/" + report.session_id + "/progress";
  for (;;) {
    try {
      const auto response = http::get(plan.broker_url, path, {}, options.client);
      if (response.status == 200) {
        out.last = protocol::deserialize<protocol::SessionProgress>(response.body);
        const auto& p = *out.last;
        out.done = out.force ? p.submitted_clients == clients && p.comparisons_done == comparisons
                             : p.complete;
        if (out.done) return out;
      }
    } catch (const http::Unreachable&) {
    } catch (const protocol::DecodeError& e) {
      log << "warning: malformed progress document: " << e.what() << "\n";
    }
    if (std::chrono::steady_clock::now() >= deadline) return out;
    std::this_thread::sleep_for(options.poll_interval);
  }
}

int fetch_and_write(const TrainPlan& plan, const SubmitReport& report, bool force,
                    const RunOptions& options, std::ostream& log) {
  std::map<std::string, std::string> station_of;
  for (const auto& s : report.stations) {
    if (s.ok) station_of[s.client_id] = s.name;
  }
  const json body = {{"force", force}};
  int failures = 0;
  int attempted = 0;
  for (const auto& s : report.stations) {
    if (!s.ok) continue;
    ++attempted;
    const auto station = std::find_if(plan.stations.begin(), plan.stations.end(),
                                      [&](const Station& st) { return st.name == s.name; });
    if (station == plan.stations.end()) {
      log << fmt::format("{}: not in the plan any more, skipped\n", s.name);
      ++failures;
      continue;
    }
    std::vector<ResultRow> rows;
    try {
      const auto response =
          http::post(station->resolver_url, "/sessions/" + report.session_id + "/results",
                     body.dump(), options.client);
      if (response.status != 200) {
        throw std::runtime_error(
            fmt::format("HTTP {}: {}", response.status, error_message(response)));
      }
      const auto j = json::parse(response.body);
      for (const auto& m : j.at("matches")) {
        const auto peer = m.at("peer_client").get<std::string>();
        const auto it = station_of.find(peer);
        rows.push_back({m.at("pseudonym").get<std::string>(),
                        it == station_of.end() ? peer : it->second,
                        m.at("similarity").get<double>(), m.at("match_id").get<std::string>()});
      }
    } catch (const std::exception& e) {
      log << fmt::format("{}: result fetch FAILED ({})\n", s.name, e.what());
      ++failures;
      continue;
    }
    std::set<std::string> matched;
    for (const auto& r : rows) matched.insert(r.pseudonym);
    csv::write_file(plan.output_dir / (s.name + ".csv"), format_results_csv(rows));
    csv::write_file(plan.output_dir / (s.name + ".links.csv"), format_links_csv(rows));
    log << fmt::format("{}: {} matched pseudonyms, {} result rows\n", s.name, matched.size(),
                       rows.size());
  }
  if (failures == 0) return kSuccess;
  return failures == attempted ? kHardFailure : kPartialFailure;
}

int collect(const TrainPlan& plan, const SubmitReport& report, const RunOptions& options,
            std::ostream& log) {
  const auto wait = wait_for_session(plan, report, options, log);
  if (!wait.done) {
    log << "timed out waiting for session " << report.session_id << ": "
        << progress_text(wait.last) << "\n";
    if (wait.last) log << protocol::serialize(*wait.last) << "\n";
    return kHardFailure;
  }
  log << "session " << report.session_id << " complete: " << progress_text(wait.last) << "\n";
  return fetch_and_write(plan, report, wait.force, options, log);
}

}  // namespace

// ---------------------------------------------------------------- plan

TrainPlan TrainPlan::from_json(const json& j, const fs::path& base_dir) {
  TrainPlan plan;
  try {
    const auto& session = j.at("session");
    plan.session.session_id = session.value("session_id", std::string());
    plan.session.threshold = session.at("threshold").get<double>();
    if (session.contains("expected_clients") && !session["expected_clients"].is_null()) {
      plan.session.expected_clients = session["expected_clients"].get<std::uint32_t>();
    }
    for (const auto& s : j.at("stations")) {
      plan.stations.push_back({s.at("name").get<std::string>(),
                               s.at("resolver_url").get<std::string>(),
                               resolve_path(s.at("pseudonym_file").get<std::string>(), base_dir)});
    }
    plan.broker_url = j.at("broker_url").get<std::string>();
    plan.output_dir = resolve_path(j.at("output_dir").get<std::string>(), base_dir);
    plan.strict = j.value("strict", false);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("invalid plan: ") + e.what());
  }
  plan.validate();
  return plan;
}

TrainPlan TrainPlan::load(const fs::path& path) {
  json j;
  try {
    j = json::parse(csv::read_file(path));
  } catch (const json::exception& e) {
    throw std::invalid_argument(fmt::format("{}: {}", path.string(), e.what()));
  }
  return from_json(j, path.parent_path());
}

void TrainPlan::validate() const {
  if (stations.size() < 2) throw std::invalid_argument("a plan needs at least 2 stations");
  std::set<std::string> names;
  for (const auto& s : stations) {
    if (s.name.empty() || !names.insert(s.name).second) {
      throw std::invalid_argument("station names must be unique and non-empty");
    }
    if (s.name.find_first_of("/\\") != std::string::npos || s.name == "." || s.name == "..") {
      throw std::invalid_argument("station name '" + s.name + "' is not a valid file name");
    }
  }
  if (broker_url.empty()) throw std::invalid_argument("broker_url is required");
  if (output_dir.empty()) throw std::invalid_argument("output_dir is required");
  auto checked = session;
  if (checked.session_id.empty()) checked.session_id = "placeholder";
  try {
    protocol::validate(checked);
  } catch (const std::exception& e) {
    throw std::invalid_argument(std::string("invalid session config: ") + e.what());
  }
}

std::vector<std::string> read_pseudonyms(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open pseudonym file " + path.string());
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    const auto first = line.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) continue;
    const auto last = line.find_last_not_of(" \t\r\n");
    out.push_back(line.substr(first, last - first + 1));
  }
  return out;
}

// ---------------------------------------------------------------- report

json SubmitReport::to_json() const {
  json stations_json = json::array();
  for (const auto& s : stations) {
    json entry = {{"name", s.name}, {"ok", s.ok}};
    if (s.ok) {
      entry["client_id"] = s.client_id;
      entry["resolved"] = s.resolved;
      entry["unresolved"] = s.unresolved;
    } else {
      entry["http_status"] = s.http_status;
      entry["error"] = s.error;
    }
    stations_json.push_back(std::move(entry));
  }
  return {{"session_id", session_id}, {"stations", std::move(stations_json)}};
}

SubmitReport SubmitReport::from_json(const json& j) {
  SubmitReport r;
  try {
    r.session_id = j.at("session_id").get<std::string>();
    for (const auto& e : j.at("stations")) {
      StationSubmission s;
      s.name = e.at("name").get<std::string>();
      s.ok = e.at("ok").get<bool>();
      if (s.ok) {
        s.client_id = e.at("client_id").get<std::string>();
        s.resolved = e.at("resolved").get<std::uint64_t>();
        s.unresolved = e.at("unresolved").get<std::uint64_t>();
      } else {
        s.http_status = e.value("http_status", 0);
        s.error = e.value("error", std::string());
      }
      r.stations.push_back(std::move(s));
    }
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("invalid submit report: ") + e.what());
  }
  return r;
}

fs::path SubmitReport::path_in(const fs::path& output_dir) {
  return output_dir / "submit_report.json";
}

std::string format_results_csv(std::vector<ResultRow> rows) {
  std::sort(rows.begin(), rows.end());
  std::string out = csv::format_row({"pseudonym", "peer_client", "similarity"});
  for (const auto& r : rows) {
    out += csv::format_row({r.pseudonym, r.peer_client, fmt::format("{:.6f}", r.similarity)});
  }
  return out;
}

std::string format_links_csv(std::vector<ResultRow> rows) {
  std::sort(rows.begin(), rows.end());
  std::string out = csv::format_row({"pseudonym", "peer_client", "similarity", "match_id"});
  for (const auto& r : rows) {
    out += csv::format_row(
        {r.pseudonym, r.peer_client, fmt::format("{:.6f}", r.similarity), r.match_id});
  }
  return out;
}

// ---------------------------------------------------------------- runs

int run_submit(const TrainPlan& plan, const RunOptions& options, std::ostream& log) {
  SubmitReport report;
  report.session_id = session_id_for(plan);
  auto config = plan.session;
  config.session_id = report.session_id;
  log << "session " << report.session_id << "\n";
  for (const auto& station : plan.stations) {
    report.stations.push_back(submit_station(station, config, plan.broker_url, options));
    log_submission(log, report.stations.back());
    if (!report.stations.back().ok && plan.strict) {
      log << "strict mode: aborting after the first failed station\n";
      write_report(plan, report);
      return kHardFailure;
    }
  }
  write_report(plan, report);
  return submission_exit_code(report);
}

int run_results(const TrainPlan& plan, const RunOptions& options, std::ostream& log) {
  const auto path = SubmitReport::path_in(plan.output_dir);
  SubmitReport report;
  try {
    report = SubmitReport::from_json(json::parse(csv::read_file(path)));
  } catch (const std::exception& e) {
    log << "cannot read the phase-1 report " << path.string() << ": " << e.what() << "\n";
    return kHardFailure;
  }
  if (!plan.session.session_id.empty() && plan.session.session_id != report.session_id) {
    log << "plan session " << plan.session.session_id << " does not match the phase-1 report ("
        << report.session_id << ")\n";
    return kHardFailure;
  }
  if (submission_exit_code(report) == kHardFailure) {
    log << "no station submitted successfully in phase 1\n";
    return kHardFailure;
  }
  const int code = collect(plan, report, options, log);
  if (code == kSuccess && submission_exit_code(report) != kSuccess) return kPartialFailure;
  return code;
}

int run_federated(const TrainPlan& plan, const RunOptions& options, std::ostream& log) {
  if (!plan.session.expected_clients) {
    log << "federated mode needs session.expected_clients: without it the broker cannot tell "
           "when every station has submitted, so a single round trip cannot know when to "
           "collect results\n";
    return kHardFailure;
  }
  SubmitReport report;
  report.session_id = session_id_for(plan);
  auto config = plan.session;
  config.session_id = report.session_id;
  log << "session " << report.session_id << "\n";

  report.stations.resize(plan.stations.size());
  {
    std::vector<std::jthread> threads;
    for (std::size_t i = 0; i < plan.stations.size(); ++i) {
      threads.emplace_back([&, i] {
        report.stations[i] = submit_station(plan.stations[i], config, plan.broker_url, options);
      });
    }
  }
  for (const auto& s : report.stations) log_submission(log, s);
  write_report(plan, report);
  const int submitted = submission_exit_code(report);
  if (submitted == kHardFailure || (plan.strict && submitted != kSuccess)) return kHardFailure;
  const int code = collect(plan, report, options, log);
  if (code == kSuccess && submitted != kSuccess) return kPartialFailure;
  return code;
}

}  // namespace pprl::train
