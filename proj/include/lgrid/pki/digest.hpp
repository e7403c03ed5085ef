// Copyright 2026 The lgrid Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace lgrid::pki {

using Sha256 = std::array<std::uint8_t, 32>;

Sha256 sha256(std::span<const std::uint8_t> data);
Sha256 sha256(std::string_view data);
std::string sha256_hex(std::string_view data);

std::string to_hex(std::span<const std::uint8_t> data);

/// Cryptographically secure random bytes.
std::string random_bytes(std::size_t n);
/// `n` random bytes, hex encoded.
std::string random_token(std::size_t n = 16);
/// Uniform in [0, 2^31).
std::uint32_t random_u31();

}  // namespace lgrid::pki
