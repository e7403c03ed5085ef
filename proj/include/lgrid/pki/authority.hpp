// Copyright 2026 The lgrid Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <string>
#include <vector>

#include "lgrid/pki/certificate.hpp"

namespace lgrid::pki {

struct Identity {
  Certificate cert;
  PrivateKey key;
};

/// A throwaway CA for development setups and test fixtures. Not a product CA:
/// no revocation, no serial bookkeeping beyond randomness.
class DevAuthority {
 public:
  static DevAuthority create(const DistinguishedName& name,
                             std::chrono::seconds validity = std::chrono::hours(24 * 365 * 5),
                             KeyAlgorithm alg = kDefaultKeyAlgorithm);

  const Certificate& certificate() const noexcept { return ca_.cert; }

  Identity issue_user(const DistinguishedName& subject, Timestamp not_before, Timestamp not_after,
                      KeyAlgorithm alg = kDefaultKeyAlgorithm) const;
  Identity issue_user(const DistinguishedName& subject,
                      std::chrono::seconds validity = std::chrono::hours(24 * 365)) const;

  /// Server certificate with DNS/IP subjectAltNames.
  Identity issue_host(const DistinguishedName& subject, const std::vector<std::string>& dns_names,
                      const std::vector<std::string>& ip_addresses,
                      std::chrono::seconds validity = std::chrono::hours(24 * 365)) const;

  const Identity& identity() const noexcept { return ca_; }

 private:
  explicit DevAuthority(Identity ca) : ca_(std::move(ca)) {}

  Identity ca_;
};

}  // namespace lgrid::pki
