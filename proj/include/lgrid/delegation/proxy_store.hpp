// Copyright 2026 The lgrid Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "lgrid/pki/proxy.hpp"

namespace lgrid::delegation {

struct StoredProxy {
  std::string bundle;
  pki::Timestamp not_after;
  std::string fingerprint;
  pki::DistinguishedName user_dn;
};

class StoreError : public std::runtime_error {
 public:
  StoreError(const std::string& what, pki::ValidationReport report)
      : std::runtime_error(what), report_(std::move(report)) {}
  const pki::ValidationReport& report() const noexcept { return report_; }

 private:
  pki::ValidationReport report_;
};

/// At most one active proxy per user. A bundle is only admitted if it
/// validates at the instant it is stored.
///
/// With a directory, bundles are also written there as <UserId>.pem (mode
/// 0600) and `load()` restores them.
class ProxyStore {
 public:
  ProxyStore(pki::TrustStore trust, pki::ProxyOptions options = {},
             std::optional<std::filesystem::path> dir = std::nullopt);

  /// Validates and stores, replacing any previous bundle of the same user.
  /// Throws StoreError on validation failure, PkiError if unparseable.
  StoredProxy put(const std::string& bundle, pki::Timestamp now);

  std::optional<StoredProxy> get(const pki::UserId& user) const;
  /// True if a stored bundle exists and validates at `at`.
  bool valid_at(const pki::UserId& user, pki::Timestamp at) const;
  void erase(const pki::UserId& user);
  std::vector<pki::UserId> users() const;

  /// Restores persisted bundles. Returns how many were loaded; bundles that
  /// no longer parse are skipped.
  std::size_t load();

  const pki::TrustStore& trust() const noexcept { return trust_; }
  const pki::ProxyOptions& options() const noexcept { return options_; }

 private:
  void persist(const pki::UserId& user, const std::string& bundle) const;

  pki::TrustStore trust_;
  pki::ProxyOptions options_;
  std::optional<std::filesystem::path> dir_;
  mutable std::mutex mu_;
  std::map<pki::UserId, StoredProxy> entries_;
};

}  // namespace lgrid::delegation
