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

#include "pprl/http.hpp"

#include <httplib.h>

#include <mutex>
#include <thread>

#include "pprl/protocol.hpp"

namespace pprl::http {

nlohmann::json ServiceError::body() const {
  nlohmann::json out = extra_.is_object() ? extra_ : nlohmann::json::object();
  out["error"] = what();
  return out;
}

Response json_response(const nlohmann::json& body, int status) {
  return Response{status, body.dump(), "application/json"};
}

struct Server::Impl {
  httplib::Server server;
  std::thread thread;
  std::string host;
  int port = 0;
  Observer observer;
  std::mutex observer_mutex;
};

Server::Server() : impl_(std::make_unique<Impl>()) {}

Server::~Server() { stop(); }

void Server::route(const std::string& method, const std::string& pattern,
                   Handler handler) {
  auto wrapped = [this, handler = std::move(handler)](
                     const httplib::Request& req, httplib::Response& res) {
    Request request;
    request.method = req.method;
    request.path = req.path;
    for (std::size_t i = 1; i < req.matches.size(); ++i) {
      request.captures.push_back(req.matches[i].str());
    }
    for (const auto& [key, value] : req.params) request.query[key] = value;
    request.body = req.body;

    Response response;
    try {
      response = handler(request);
    } catch (const ServiceError& e) {
      response = json_response(e.body(), e.status());
    } catch (const protocol::DecodeError& e) {
      response = json_response({{"error", e.what()}}, 400);
    } catch (const std::exception& e) {
      response = json_response({{"error", e.what()}}, 500);
    }
    res.status = response.status;
    res.set_content(response.body, response.content_type);

    std::lock_guard lock(impl_->observer_mutex);
    if (impl_->observer) impl_->observer(request, response);
  };
  if (method == "GET") {
    impl_->server.Get(pattern, std::move(wrapped));
  } else if (method == "POST") {
    impl_->server.Post(pattern, std::move(wrapped));
  } else {
    throw std::invalid_argument("unsupported method " + method);
  }
}

void Server::set_max_body_size(std::size_t bytes) {
  impl_->server.set_payload_max_length(bytes);
}

void Server::set_observer(Observer observer) {
  std::lock_guard lock(impl_->observer_mutex);
  impl_->observer = std::move(observer);
}

int Server::start(const std::string& host, int port) {
  if (impl_->thread.joinable()) throw std::logic_error("server already started");
  impl_->host = host;
  if (port == 0) {
    impl_->port = impl_->server.bind_to_any_port(host);
  } else if (impl_->server.bind_to_port(host, port)) {
    impl_->port = port;
  } else {
    impl_->port = -1;
  }
  if (impl_->port <= 0) {
    throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
  }
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return impl_->port;
}

void Server::wait() {
  if (impl_->thread.joinable()) impl_->thread.join();
}

void Server::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

std::string Server::url() const {
  return "http://" + impl_->host + ":" + std::to_string(impl_->port);
}

namespace {

httplib::Client make_client(const std::string& base_url,
                            const ClientOptions& options) {
  httplib::Client client(base_url);
  if (!client.is_valid()) throw Unreachable("invalid service URL " + base_url);
  client.set_connection_timeout(std::chrono::seconds(5));
  client.set_read_timeout(options.timeout);
  client.set_write_timeout(options.timeout);
  return client;
}

Response convert(const httplib::Result& result, const std::string& target) {
  if (!result) {
    throw Unreachable(target + ": " + httplib::to_string(result.error()));
  }
  return Response{result->status, result->body,
                  result->get_header_value("Content-Type")};
}

}  // namespace

Response post(const std::string& base_url, const std::string& path,
              const std::string& body, const ClientOptions& options) {
  auto client = make_client(base_url, options);
  return convert(client.Post(path, body, "application/json"), base_url + path);
}

Response get(const std::string& base_url, const std::string& path,
             const std::map<std::string, std::string>& query,
             const ClientOptions& options) {
  auto client = make_client(base_url, options);
  httplib::Params params(query.begin(), query.end());
  return convert(client.Get(path, params, httplib::Headers{}), base_url + path);
}

}  // namespace pprl::http
