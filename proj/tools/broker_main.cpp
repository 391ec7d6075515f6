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


#include <CLI11.hpp>

#include "cli_common.hpp"
#include "pprl/broker_service.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Linkage broker: collects bit vectors and matches them across stations"};
  std::string listen = pprl::cli::env_or("PPRL_BROKER_LISTEN", "127.0.0.1:8083");
  std::string snapshot;
  long ttl_seconds = 24 * 3600;
  unsigned parallelism = 1;
  std::size_t max_body = 256u << 20;
  app.add_option("--listen", listen, "host:port to bind (env PPRL_BROKER_LISTEN)");
  app.add_option("--snapshot", snapshot, "Persist sessions to this JSON file")
      ->envname("PPRL_BROKER_SNAPSHOT");
  app.add_option("--session-ttl", ttl_seconds, "Seconds of inactivity before a session is dropped")
      ->envname("PPRL_BROKER_SESSION_TTL")
      ->check(CLI::PositiveNumber);
  app.add_option("--parallelism", parallelism, "Matcher threads")
      ->envname("PPRL_BROKER_PARALLELISM")
      ->check(CLI::Range(1u, 256u));
  app.add_option("--max-body-bytes", max_body, "Largest accepted request body")
      ->envname("PPRL_BROKER_MAX_BODY");
  CLI11_PARSE(app, argc, argv);

  return pprl::cli::guarded([&] {
    pprl::BrokerOptions options;
    options.parallelism = parallelism;
    options.session_ttl = std::chrono::seconds(ttl_seconds);
    if (!snapshot.empty()) options.snapshot_path = snapshot;
    pprl::Broker broker(options);
    pprl::http::Server server;
    server.set_max_body_size(max_body);
    broker.mount(server);
    const int code = pprl::cli::serve(server, listen, "broker");
    broker.wait_idle();
    return code;
  });
}
