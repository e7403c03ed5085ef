// Copyright 2026 The lgrid Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>

namespace lgrid::delegation {

// Wire framing: 4-byte big-endian length, then a UTF-8 JSON document whose
// "type" field names the variant. No variant has a field for private keys.

class WireError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string frame(std::string_view json);
/// Throws WireError on a short or inconsistent frame.
std::string_view unframe(std::string_view bytes);

struct Init {
  std::string subject_dn;
};

struct CsrReply {
  std::string session_id;
  std::string csr_pem;
};

struct SignedProxy {
  std::string session_id;
  std::string proxy_cert_pem;
};

struct Ack {
  std::string session_id;
  std::string proxy_fingerprint;
  std::int64_t not_after = 0;  // unix seconds
};

struct Fault {
  std::string code;
  std::string detail;
};

namespace fault {
inline constexpr std::string_view kDnMismatch = "dn-mismatch";
inline constexpr std::string_view kBadState = "bad-state";
inline constexpr std::string_view kKeyMismatch = "key-mismatch";
inline constexpr std::string_view kSessionExpired = "session-expired";
inline constexpr std::string_view kUnknownSession = "unknown-session";
inline constexpr std::string_view kValidationFailed = "validation-failed";
inline constexpr std::string_view kSubstitution = "substitution-attack";
inline constexpr std::string_view kMalformed = "malformed";
inline constexpr std::string_view kUnauthenticated = "unauthenticated";
inline constexpr std::string_view kInternal = "internal";
}  // namespace fault

using Message = std::variant<Init, CsrReply, SignedProxy, Ack, Fault>;

std::string_view type_name(const Message& m);

std::string to_json(const Message& m);
/// Throws WireError on malformed JSON, unknown type or missing fields.
Message message_from_json(std::string_view json);

inline std::string encode(const Message& m) { return frame(to_json(m)); }
inline Message decode(std::string_view bytes) { return message_from_json(unframe(bytes)); }

inline Fault make_fault(std::string_view code, std::string detail) {
  return Fault{std::string(code), std::move(detail)};
}

}  // namespace lgrid::delegation
