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

// Minimal JSON-over-HTTP layer for the station and linkage-unit services.
// Wraps cpp-httplib so that only http.cpp includes it.

#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace pprl::http {

struct Response {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
};

struct Request {
  std::string method;
  std::string path;
  std::vector<std::string> captures;  // regex groups of the route pattern
  std::map<std::string, std::string> query;
  std::string body;
};

/// Thrown by handlers to produce a non-2xx response.
class ServiceError : public std::runtime_error {
 public:
  ServiceError(int status, const std::string& message,
               nlohmann::json extra = nlohmann::json::object())
      : std::runtime_error(message), status_(status), extra_(std::move(extra)) {}
  int status() const noexcept { return status_; }
  /// {"error": message} merged with any extra fields.
  nlohmann::json body() const;

 private:
  int status_;
  nlohmann::json extra_;
};

/// Connection-level failure talking to a peer service.
class Unreachable : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

Response json_response(const nlohmann::json& body, int status = 200);

using Handler = std::function<Response(const Request&)>;
using Observer = std::function<void(const Request&, const Response&)>;

/// Threaded HTTP server. Handlers run on the server's worker threads.
/// ServiceError maps to its status, protocol::DecodeError to 400, anything
/// else to 500.
class Server {
 public:
  Server();
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  /// `pattern` is an ECMAScript regex matched against the whole path.
  void route(const std::string& method, const std::string& pattern,
             Handler handler);
  void set_max_body_size(std::size_t bytes);
  /// Sees every request/response pair after the handler ran.
  void set_observer(Observer observer);

  /// Binds (port 0 picks a free port) and serves on a background thread.
  /// Returns the bound port.
  int start(const std::string& host, int port);
  /// Blocks until stop() is called from another thread or a signal handler.
  void wait();
  void stop();

  std::string url() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

struct ClientOptions {
  std::chrono::seconds timeout{120};
};

/// Each call opens its own connection; safe to use from several threads.
Response post(const std::string& base_url, const std::string& path,
              const std::string& body, const ClientOptions& options = {});
Response get(const std::string& base_url, const std::string& path,
             const std::map<std::string, std::string>& query = {},
             const ClientOptions& options = {});

}  // namespace pprl::http
