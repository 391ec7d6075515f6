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

#pragma once

#include <string_view>

#include "pprl/http.hpp"
#include "pprl/protocol.hpp"

namespace pprl {

/// Station-side masking service. Stateless: every request carries its own
/// scheme, and nothing about the records outlives the response.
class EncoderService {
 public:
  /// Throws AttributeMismatch / SchemeError on invalid input.
  protocol::EncodeResponse encode(const protocol::EncodeRequest& request) const;

  /// POST /encode body -> 200 with vectors, 400 on malformed or invalid
  /// input, 422 naming the attribute on an attribute-set mismatch.
  http::Response handle_encode(std::string_view body) const;

  /// Registers POST /encode and GET /health.
  void mount(http::Server& server) const;
};

}  // namespace pprl
