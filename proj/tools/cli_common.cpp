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


#include "cli_common.hpp"

#include <pthread.h>
#include <signal.h>

#include <iostream>
#include <stdexcept>

namespace pprl::cli {

std::string env_or(const char* name, const std::string& fallback) {
  const char* value = std::getenv(name);
  return value != nullptr && *value != '\0' ? std::string(value) : fallback;
}

int serve(http::Server& server, const std::string& listen, const std::string& service) {
  const auto colon = listen.rfind(':');
  if (colon == std::string::npos) {
    throw std::invalid_argument("listen address must be host:port, got '" + listen + "'");
  }
  const auto host = listen.substr(0, colon);
  const int port = std::stoi(listen.substr(colon + 1));

  // Block the signals before the server threads exist so that only the
  // sigwait below receives them.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  server.start(host, port);
  std::cerr << service << " listening on " << server.url() << std::endl;
  int received = 0;
  sigwait(&signals, &received);
  std::cerr << service << " shutting down" << std::endl;
  server.stop();
  return 0;
}

}  // namespace pprl::cli
