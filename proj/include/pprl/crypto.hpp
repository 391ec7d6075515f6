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

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace pprl::crypto {

using Digest = std::array<std::uint8_t, 32>;

/// HMAC-SHA-256 over `data` keyed with `key`. Both are treated as raw bytes.
Digest hmac_sha256(std::string_view key, std::string_view data);

Digest sha256(std::string_view data);

/// First eight digest bytes as a big-endian unsigned integer.
std::uint64_t leading_u64(const Digest& digest);

std::string to_hex(std::string_view bytes);
std::string to_hex(const Digest& digest);

/// Cryptographically secure random bytes from the system CSPRNG.
std::string random_bytes(std::size_t count);

/// Random version-4 UUID string (122 random bits).
std::string random_uuid();

std::string base64_encode(std::string_view bytes);

/// Strict RFC 4648 decoding with padding; nullopt on any malformed input.
std::optional<std::string> base64_decode(std::string_view text);

}  // namespace pprl::crypto
