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

#include "pprl/encoder_service.hpp"

namespace pprl {

protocol::EncodeResponse EncoderService::encode(
    const protocol::EncodeRequest& request) const {
  const RecordEncoder encoder(request.scheme);
  protocol::EncodeResponse response;
  response.vectors.reserve(request.records.size());
  for (const auto& record : request.records) {
    response.vectors.push_back(encoder.encode(record));
  }
  return response;
}

http::Response EncoderService::handle_encode(std::string_view body) const {
  // Error messages name attributes and fields only, never record values.
  try {
    const auto request = protocol::deserialize<protocol::EncodeRequest>(body);
    return http::json_response(protocol::to_json(encode(request)));
  } catch (const protocol::DecodeError& e) {
    return http::json_response({{"error", e.what()}}, 400);
  } catch (const AttributeMismatch& e) {
    return http::json_response(
        {{"error", e.what()}, {"attribute", e.attribute()}}, 422);
  } catch (const SchemeError& e) {
    return http::json_response({{"error", e.what()}}, 400);
  }
}

void EncoderService::mount(http::Server& server) const {
  server.route("POST", "/encode", [this](const http::Request& req) {
    return handle_encode(req.body);
  });
  server.route("GET", "/health", [](const http::Request&) {
    return http::json_response({{"status", "ok"}, {"service", "encoder"}});
  });
}

}  // namespace pprl
