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
#include "pprl/encoder_service.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Stateless Bloom-filter encoding service"};
  std::string listen = pprl::cli::env_or("PPRL_ENCODER_LISTEN", "127.0.0.1:8081");
  std::size_t max_body = 64u << 20;
  app.add_option("--listen", listen, "host:port to bind (env PPRL_ENCODER_LISTEN)");
  app.add_option("--max-body-bytes", max_body, "Largest accepted request body")
      ->envname("PPRL_ENCODER_MAX_BODY");
  CLI11_PARSE(app, argc, argv);

  return pprl::cli::guarded([&] {
    pprl::EncoderService service;
    pprl::http::Server server;
    server.set_max_body_size(max_body);
    service.mount(server);
    return pprl::cli::serve(server, listen, "encoder");
  });
}
