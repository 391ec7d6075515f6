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

#include "cli_common.hpp"
#include "pprl/train.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Drives a linkage session across stations"};
  app.require_subcommand(1);
  std::string plan_path;
  double timeout = 600.0;
  double poll = 1.0;

  auto* submit = app.add_subcommand("submit", "Phase 1: submit the session at every station");
  submit->add_option("--plan", plan_path, "Train plan JSON")->required();

  auto* results = app.add_subcommand("results", "Phase 2: collect per-station results");
  results->add_option("--plan", plan_path, "Train plan JSON")->required();
  results->add_option("--timeout", timeout, "Seconds to wait for the broker")
      ->check(CLI::PositiveNumber);
  results->add_option("--poll", poll, "Seconds between progress polls")
      ->check(CLI::PositiveNumber);

  auto* federated =
      app.add_subcommand("federated", "Submit concurrently and collect in one invocation");
  federated->add_option("--plan", plan_path, "Train plan JSON")->required();
  federated->add_option("--timeout", timeout, "Seconds to wait for the broker")
      ->check(CLI::PositiveNumber);
  federated->add_option("--poll", poll, "Seconds between progress polls")
      ->check(CLI::PositiveNumber);
  CLI11_PARSE(app, argc, argv);

  return pprl::cli::guarded([&] {
    const auto plan = pprl::train::TrainPlan::load(plan_path);
    pprl::train::RunOptions options;
    options.timeout = std::chrono::milliseconds(static_cast<long>(timeout * 1000));
    options.poll_interval = std::chrono::milliseconds(static_cast<long>(poll * 1000));
    if (submit->parsed()) return pprl::train::run_submit(plan, options, std::cout);
    if (results->parsed()) return pprl::train::run_results(plan, options, std::cout);
    return pprl::train::run_federated(plan, options, std::cout);
  });
}
