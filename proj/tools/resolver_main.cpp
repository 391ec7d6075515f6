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

#include <iostream>
#include <memory>

#include "cli_common.hpp"
#include "pprl/csv.hpp"
#include "pprl/protocol.hpp"
#include "pprl/resolver_service.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Station resolver: maps pseudonyms to encoded records and talks to the broker"};
  std::string listen = pprl::cli::env_or("PPRL_RESOLVER_LISTEN", "127.0.0.1:8082");
  std::string mpi_path;
  std::string scheme_path;
  std::string encoder_url;
  std::string broker_url;
  std::string binding_store;
  bool strict = false;
  long timeout = 120;
  app.add_option("--listen", listen, "host:port to bind (env PPRL_RESOLVER_LISTEN)");
  app.add_option("--mpi", mpi_path, "Patient index CSV")->envname("PPRL_RESOLVER_MPI")->required();
  app.add_option("--scheme", scheme_path, "Encoding scheme JSON")
      ->envname("PPRL_RESOLVER_SCHEME")
      ->required();
  app.add_option("--encoder-url", encoder_url, "Encoder service base URL")
      ->envname("PPRL_ENCODER_URL")
      ->required();
  app.add_option("--broker-url", broker_url, "Default broker base URL")->envname("PPRL_BROKER_URL");
  app.add_option("--binding-store", binding_store, "JSON-lines file for session bindings")
      ->envname("PPRL_RESOLVER_BINDINGS");
  app.add_flag("--strict", strict, "Fail submissions containing unknown pseudonyms")
      ->envname("PPRL_RESOLVER_STRICT");
  app.add_option("--client-timeout", timeout, "Seconds to wait for encoder and broker")
      ->envname("PPRL_RESOLVER_CLIENT_TIMEOUT")
      ->check(CLI::PositiveNumber);
  CLI11_PARSE(app, argc, argv);

  return pprl::cli::guarded([&] {
    auto mpi = std::make_shared<pprl::CsvMpiStore>(pprl::CsvMpiStore::load(mpi_path));
    pprl::ResolverOptions options;
    options.scheme = pprl::protocol::deserialize<pprl::EncodingScheme>(
        pprl::csv::read_file(scheme_path));
    options.encoder_url = encoder_url;
    options.default_broker_url = broker_url;
    options.strict = strict;
    if (!binding_store.empty()) options.binding_store = binding_store;
    options.client.timeout = std::chrono::seconds(timeout);
    pprl::Resolver resolver(options, mpi);
    std::cerr << "loaded " << mpi->size() << " index records" << std::endl;
    pprl::http::Server server;
    server.set_max_body_size(64u << 20);
    resolver.mount(server);
    return pprl::cli::serve(server, listen, "resolver");
  });
}
