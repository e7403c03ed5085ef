// Copyright 2026 The lgrid Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>

#include "lgrid/pki/certificate.hpp"
#include "lgrid/pki/dn.hpp"

namespace lgrid::gateway {

struct ApiSession {
  pki::UserId user;
  pki::DistinguishedName dn;
  pki::Timestamp issued_at;
};

/// Bearer tokens issued after a delegation. Only SHA-256 digests of tokens
/// are kept, in memory and in the append-only journal.
class TokenTable {
 public:
  /// Without a journal path nothing survives a restart.
  explicit TokenTable(std::optional<std::filesystem::path> journal = std::nullopt);

  /// A fresh 128-bit token, hex encoded.
  std::string issue(const pki::DistinguishedName& dn, pki::Timestamp now);
  std::optional<ApiSession> lookup(std::string_view token) const;

  /// Replays the journal; returns the number of tokens restored.
  std::size_t load();
  std::size_t size() const;

 private:
  std::optional<std::filesystem::path> journal_;
  mutable std::mutex mu_;
  std::map<std::string, ApiSession> by_digest_;
};

}  // namespace lgrid::gateway
