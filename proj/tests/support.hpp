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


// Fixtures shared by the unit and acceptance tests.

#pragma once

#include <filesystem>
#include <memory>
#include <mutex>
#include <random>
#include <string>
#include <vector>

#include "pprl/bit_vector.hpp"
#include "pprl/broker_service.hpp"
#include "pprl/encoder_service.hpp"
#include "pprl/http.hpp"
#include "pprl/masking.hpp"
#include "pprl/resolver_service.hpp"

namespace pprl::testing {

/// Directory removed on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

/// Jaccard by looping over individual bits.
double naive_jaccard(const BitVector& a, const BitVector& b);

SchemeSecrets fixed_secrets(char tag = 'a');

/// Five-attribute scheme with fixed weights (no sampling), m = 1024.
EncodingScheme test_scheme(char tag = 'a', bool balanced = true);

/// Random UTF-8 text of up to 24 code points drawn from assorted blocks.
std::string random_unicode(std::mt19937_64& gen);

BitVector random_vector(std::size_t length, std::uint64_t seed, double density = 0.5);

struct Exchange {
  std::string service;
  std::string method;
  std::string path;
  std::string request_body;
  int status = 0;
  std::string response_body;
};

/// Thread-safe log of HTTP traffic seen by the observed servers.
class TrafficLog {
 public:
  http::Observer observer(std::string service);
  std::vector<Exchange> snapshot() const;
  void clear();

 private:
  mutable std::mutex mutex_;
  std::vector<Exchange> exchanges_;
};

struct StackOptions {
  EncodingScheme scheme = test_scheme();
  std::vector<std::string> mpi_csvs;  // one resolver per entry
  bool strict = false;
  BrokerOptions broker;
};

/// Encoder, broker and resolvers running in-process on loopback ports.
class ServiceStack {
 public:
  explicit ServiceStack(StackOptions options);
  ~ServiceStack();

  const std::string& encoder_url() const { return encoder_url_; }
  const std::string& broker_url() const { return broker_url_; }
  const std::string& resolver_url(std::size_t i) const { return resolver_urls_.at(i); }
  std::size_t resolver_count() const { return resolver_urls_.size(); }
  Broker& broker() { return *broker_; }
  Resolver& resolver(std::size_t i) { return *resolvers_.at(i); }
  TrafficLog& traffic() { return traffic_; }

 private:
  TrafficLog traffic_;
  EncoderService encoder_;
  std::unique_ptr<Broker> broker_;
  std::vector<std::unique_ptr<Resolver>> resolvers_;
  std::vector<std::unique_ptr<http::Server>> servers_;
  std::string encoder_url_;
  std::string broker_url_;
  std::vector<std::string> resolver_urls_;
};

}  // namespace pprl::testing
