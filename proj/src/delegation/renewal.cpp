// Copyright 2026 The lgrid Authors
// SPDX-License-Identifier: Apache-2.0

#include "lgrid/delegation/renewal.hpp"

#include <map>

namespace lgrid::delegation {

std::string_view to_string(RenewalOutcome o) {
  switch (o) {
    case RenewalOutcome::kRenewed:
      return "renewed";
    case RenewalOutcome::kRenewalFailed:
      return "renewal-failed";
    case RenewalOutcome::kExpiringUnrenewable:
      return "expiring-unrenewable";
  }
  return "?";
}

RepositoryRenewalSource::RepositoryRenewalSource(
    ChannelFactory connect, std::function<std::optional<RepositoryLogin>(const pki::UserId&)> logins)
    : connect_(std::move(connect)), logins_(std::move(logins)) {}

std::string RepositoryRenewalSource::fetch(const pki::UserId& user, std::chrono::seconds lifetime) {
  auto login = logins_(user);
  if (!login) throw RenewalUnavailable("no repository login for " + user.str());
  auto channel = connect_();
  return myproxy_get(*channel, login->username, login->passphrase, lifetime);
}

std::vector<RenewalAction> renew_if_needed(ProxyStore& store, const std::vector<ActiveJob>& jobs,
                                           const RenewalPolicy& policy, pki::Timestamp now,
                                           RenewalSource* source) {
  std::map<pki::UserId, std::vector<std::string>> by_user;
  for (const auto& job : jobs) by_user[job.owner].push_back(job.job_id);

  std::vector<RenewalAction> actions;
  for (auto& [user, job_ids] : by_user) {
    auto stored = store.get(user);
    if (!stored) continue;
    if (stored->not_after - now > policy.threshold) continue;

    RenewalAction action{RenewalOutcome::kExpiringUnrenewable, user, job_ids, stored->not_after,
                         std::nullopt, {}};
    if (!policy.external_endpoint || !source) {
      action.detail = "no external repository configured";
      actions.push_back(std::move(action));
      continue;
    }

    try {
      auto bundle = source->fetch(user, policy.lifetime);
      auto parsed = pki::parse_proxy_bundle(bundle);
      if (!(pki::derive_user_id(parsed.user_dn()) == user)) {
        throw RenewalUnavailable("repository returned a proxy of " + parsed.user_dn().str());
      }
      auto fresh = store.put(bundle, now);
      action.outcome = RenewalOutcome::kRenewed;
      action.new_not_after = fresh.not_after;
    } catch (const std::exception& e) {
      action.outcome = RenewalOutcome::kRenewalFailed;
      action.detail = e.what();
    }
    actions.push_back(std::move(action));
  }
  return actions;
}

}  // namespace lgrid::delegation
