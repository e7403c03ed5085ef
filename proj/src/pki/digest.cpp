// Copyright 2026 The lgrid Authors
// SPDX-License-Identifier: Apache-2.0

#include "lgrid/pki/digest.hpp"

#include <openssl/rand.h>
#include <openssl/sha.h>

#include <cstring>

#include "ossl.hpp"

namespace lgrid::pki {

Sha256 sha256(std::span<const std::uint8_t> data) {
  Sha256 out{};
  SHA256(data.data(), data.size(), out.data());
  return out;
}

Sha256 sha256(std::string_view data) {
  return sha256(std::span(reinterpret_cast<const std::uint8_t*>(data.data()), data.size()));
}

std::string sha256_hex(std::string_view data) { return to_hex(sha256(data)); }

std::string to_hex(std::span<const std::uint8_t> data) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(data.size() * 2);
  for (auto b : data) {
    out.push_back(kDigits[b >> 4]);
    out.push_back(kDigits[b & 0xf]);
  }
  return out;
}

std::string random_bytes(std::size_t n) {
  std::string out(n, '\0');
  if (RAND_bytes(reinterpret_cast<unsigned char*>(out.data()), static_cast<int>(n)) != 1) {
    detail::fail("RAND_bytes");
  }
  return out;
}

std::string random_token(std::size_t n) {
  auto raw = random_bytes(n);
  return to_hex(std::span(reinterpret_cast<const std::uint8_t*>(raw.data()), raw.size()));
}

std::uint32_t random_u31() {
  auto raw = random_bytes(4);
  std::uint32_t v;
  std::memcpy(&v, raw.data(), 4);
  return v & 0x7fffffffu;
}

}  // namespace lgrid::pki
