// Copyright 2026 The lgrid Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <optional>
#include <stdexcept>
#include <string>

#include "lgrid/delegation/channel.hpp"
#include "lgrid/delegation/message.hpp"
#include "lgrid/pki/proxy.hpp"

namespace lgrid::delegation {

class DelegationError : public std::runtime_error {
 public:
  enum class Kind {
    kSubstitution,     // CSR subject is not an extension of our DN
    kServerFault,      // the server answered with a Fault
    kTimeout,          // the server reported the session expired
    kChannelIdentity,  // the authenticated peer is not the configured server
    kProtocol,         // unexpected or malformed reply
  };

  DelegationError(Kind kind, const std::string& what, std::string fault_code = {})
      : std::runtime_error(what), kind_(kind), fault_code_(std::move(fault_code)) {}

  Kind kind() const noexcept { return kind_; }
  const std::string& fault_code() const noexcept { return fault_code_; }

 private:
  Kind kind_;
  std::string fault_code_;
};

struct ClientOptions {
  /// When set, the channel's authenticated peer must carry exactly this DN.
  std::optional<pki::DistinguishedName> expected_server;
  pki::ProxyOptions proxy;
};

struct DelegationResult {
  Ack ack;
  Transcript transcript;
};

/// Client half of the embedded handshake:
///   Init(own DN) -> CsrReply; sign locally -> SignedProxy -> Ack.
///
/// The user key only ever signs; nothing derived from it other than the
/// signed proxy certificate is sent. Two round trips on one connection.
DelegationResult client_delegate(Channel& channel, const pki::Certificate& user_cert,
                                 const pki::PrivateKey& user_key, std::chrono::seconds lifetime,
                                 const ClientOptions& options = {});

/// 12 hours, the usual grid proxy lifetime.
inline constexpr std::chrono::seconds kDefaultProxyLifetime = std::chrono::hours(12);

}  // namespace lgrid::delegation
