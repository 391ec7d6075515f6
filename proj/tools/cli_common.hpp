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


// Shared plumbing for the command-line tools.

#pragma once

#include <cstdlib>
#include <string>

#include "pprl/http.hpp"

namespace pprl::cli {

/// Value of environment variable `name`, or `fallback` when unset or empty.
std::string env_or(const char* name, const std::string& fallback);

/// Binds `server` to "host:port", logs the URL, blocks until SIGINT or
/// SIGTERM and shuts down. Returns the process exit code.
int serve(http::Server& server, const std::string& listen, const std::string& service);

/// Runs `body` and maps escaping exceptions to a message and exit code 2.
template <typename F>
int guarded(F&& body);

}  // namespace pprl::cli

#include <exception>
#include <iostream>

template <typename F>
int pprl::cli::guarded(F&& body) {
  try {
    return body();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
