// Copyright 2026 The lgrid Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "lgrid/delegation/myproxy.hpp"
#include "lgrid/delegation/proxy_store.hpp"

namespace lgrid::delegation {

struct RenewalPolicy {
  std::chrono::seconds threshold = std::chrono::minutes(30);
  /// Without an external repository, proxies cannot be renewed.
  std::optional<Endpoint> external_endpoint;
  std::chrono::seconds check_interval{60};
  std::chrono::seconds lifetime = std::chrono::hours(12);
};

struct ActiveJob {
  std::string job_id;
  pki::UserId owner;
};

enum class RenewalOutcome { kRenewed, kRenewalFailed, kExpiringUnrenewable };

std::string_view to_string(RenewalOutcome o);

struct RenewalAction {
  RenewalOutcome outcome;
  pki::UserId user;
  std::vector<std::string> job_ids;
  pki::Timestamp old_not_after;
  std::optional<pki::Timestamp> new_not_after;
  std::string detail;
};

class RenewalUnavailable : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Produces a fresh proxy file for a user. Throws on any failure,
/// including an unreachable repository.
class RenewalSource {
 public:
  virtual ~RenewalSource() = default;
  virtual std::string fetch(const pki::UserId& user, std::chrono::seconds lifetime) = 0;
};

struct RepositoryLogin {
  std::string username;
  std::string passphrase;
};

using ChannelFactory = std::function<std::unique_ptr<Channel>()>;

/// Renews through a MyProxy-style repository with per-user logins.
class RepositoryRenewalSource : public RenewalSource {
 public:
  RepositoryRenewalSource(ChannelFactory connect,
                          std::function<std::optional<RepositoryLogin>(const pki::UserId&)> logins);

  std::string fetch(const pki::UserId& user, std::chrono::seconds lifetime) override;

 private:
  ChannelFactory connect_;
  std::function<std::optional<RepositoryLogin>(const pki::UserId&)> logins_;
};

/// One pass of the renewal loop. Every user with an active job whose proxy
/// expires within the threshold yields exactly one action. On failure the
/// stored proxy is left untouched.
std::vector<RenewalAction> renew_if_needed(ProxyStore& store, const std::vector<ActiveJob>& jobs,
                                           const RenewalPolicy& policy, pki::Timestamp now,
                                           RenewalSource* source = nullptr);

}  // namespace lgrid::delegation
