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


#include "support.hpp"

#include <random>

#include "pprl/crypto.hpp"

namespace pprl::testing {

namespace {

std::string utf8(char32_t c) {
  std::string out;
  if (c < 0x80) {
    out += static_cast<char>(c);
  } else if (c < 0x800) {
    out += static_cast<char>(0xC0 | (c >> 6));
    out += static_cast<char>(0x80 | (c & 0x3F));
  } else if (c < 0x10000) {
    out += static_cast<char>(0xE0 | (c >> 12));
    out += static_cast<char>(0x80 | ((c >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (c & 0x3F));
  } else {
    out += static_cast<char>(0xF0 | (c >> 18));
    out += static_cast<char>(0x80 | ((c >> 12) & 0x3F));
    out += static_cast<char>(0x80 | ((c >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (c & 0x3F));
  }
  return out;
}

}  // namespace

// Mix of ASCII, whitespace, controls, Latin-1, ligatures, combining marks,
// fullwidth forms, CJK and astral code points.
std::string random_unicode(std::mt19937_64& gen) {
  static const std::vector<std::pair<char32_t, char32_t>> ranges = {
      {0x20, 0x7E},     {0x00, 0x1F},     {0x09, 0x0D},   {0x80, 0xFF},
      {0x100, 0x24F},   {0x300, 0x36F},   {0x1E00, 0x1EFF}, {0xFB00, 0xFB06},
      {0xFF01, 0xFF5E}, {0x2000, 0x206F}, {0x4E00, 0x4E80}, {0x1F600, 0x1F64F},
      {0x391, 0x3C9},   {0xA730, 0xA770}, {0x2460, 0x24FF}};
  std::uniform_int_distribution<std::size_t> len(0, 24);
  std::uniform_int_distribution<std::size_t> pick(0, ranges.size() - 1);
  std::string s;
  for (std::size_t i = len(gen); i > 0; --i) {
    const auto [lo, hi] = ranges[pick(gen)];
    s += utf8(std::uniform_int_distribution<std::uint32_t>(lo, hi)(gen));
  }
  return s;
}

TempDir::TempDir() {
  path_ = std::filesystem::temp_directory_path() / ("pprl-test-" + crypto::random_uuid());
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

double naive_jaccard(const BitVector& a, const BitVector& b) {
  std::size_t both = 0;
  std::size_t either = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    both += (a.test(i) && b.test(i)) ? 1 : 0;
    either += (a.test(i) || b.test(i)) ? 1 : 0;
  }
  return either == 0 ? 1.0 : static_cast<double>(both) / static_cast<double>(either);
}

SchemeSecrets fixed_secrets(char tag) {
  return {std::string(32, tag), std::string(16, static_cast<char>(tag + 1)),
          std::string(32, static_cast<char>(tag + 2))};
}

EncodingScheme test_scheme(char tag, bool balanced) {
  const std::map<std::string, double> weights = {{"first_name", 7.0},
                                                 {"last_name", 6.8},
                                                 {"gender", 2.0},
                                                 {"birth_date", 5.8},
                                                 {"city", 7.1}};
  return build_scheme(default_attributes(), weights, fixed_secrets(tag), 1024, 2, balanced);
}

BitVector random_vector(std::size_t length, std::uint64_t seed, double density) {
  std::mt19937_64 gen(seed);
  std::bernoulli_distribution bit(density);
  BitVector v(length);
  for (std::size_t i = 0; i < length; ++i) v.set(i, bit(gen));
  return v;
}

http::Observer TrafficLog::observer(std::string service) {
  return [this, service](const http::Request& req, const http::Response& res) {
    std::lock_guard lock(mutex_);
    exchanges_.push_back({service, req.method, req.path, req.body, res.status, res.body});
  };
}

std::vector<Exchange> TrafficLog::snapshot() const {
  std::lock_guard lock(mutex_);
  return exchanges_;
}

void TrafficLog::clear() {
  std::lock_guard lock(mutex_);
  exchanges_.clear();
}

ServiceStack::ServiceStack(StackOptions options) {
  auto start = [this](const std::string& service) -> http::Server& {
    servers_.push_back(std::make_unique<http::Server>());
    servers_.back()->set_max_body_size(256u << 20);
    servers_.back()->set_observer(traffic_.observer(service));
    return *servers_.back();
  };

  auto& encoder_server = start("encoder");
  encoder_.mount(encoder_server);
  encoder_server.start("127.0.0.1", 0);
  encoder_url_ = encoder_server.url();

  broker_ = std::make_unique<Broker>(options.broker);
  auto& broker_server = start("broker");
  broker_->mount(broker_server);
  broker_server.start("127.0.0.1", 0);
  broker_url_ = broker_server.url();

  for (std::size_t i = 0; i < options.mpi_csvs.size(); ++i) {
    ResolverOptions ro;
    ro.scheme = options.scheme;
    ro.encoder_url = encoder_url_;
    ro.default_broker_url = broker_url_;
    ro.strict = options.strict;
    auto mpi = std::make_shared<CsvMpiStore>(CsvMpiStore::parse(options.mpi_csvs[i]));
    resolvers_.push_back(std::make_unique<Resolver>(ro, mpi));
    auto& server = start("resolver" + std::to_string(i + 1));
    resolvers_.back()->mount(server);
    server.start("127.0.0.1", 0);
    resolver_urls_.push_back(server.url());
  }
}

ServiceStack::~ServiceStack() {
  for (auto& s : servers_) s->stop();
  broker_->wait_idle();
}

}  // namespace pprl::testing
