// Copyright 2026 The lgrid Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "lgrid/delegation/channel.hpp"
#include "lgrid/delegation/proxy_store.hpp"
#include "lgrid/delegation/renewal.hpp"
#include "lgrid/delegation/server.hpp"
#include "lgrid/gateway/policy.hpp"
#include "lgrid/gateway/tokens.hpp"
#include "lgrid/jobs/manager.hpp"
#include "lgrid/net/http.hpp"

namespace lgrid::gateway {

using ApiRequest = net::HttpRequest;
using ApiResponse = net::HttpResponse;

inline constexpr std::string_view kTokenHeader = "x-lgrid-token";
inline constexpr std::string_view kVoHeader = "x-lgrid-vo";

struct AuthDecision {
  std::optional<ApiSession> session;  // set on allow
  std::string_view reason;            // set on deny

  bool allowed() const noexcept { return reason.empty(); }
};

struct GatewayOptions {
  std::filesystem::path state_root;
  std::string host_name = "localhost";
  pki::TrustStore trust;
  pki::ProxyOptions proxy_options;
  VoPolicy policy;
  std::shared_ptr<jobs::Executor> executor;
  std::function<jobs::TimePoint()> clock = jobs::now_ms;
  std::chrono::seconds session_deadline{60};
  delegation::RenewalPolicy renewal;
  /// Connects to the external repository; unset disables /delegate/myproxy
  /// and renewal.
  delegation::ChannelFactory repository;
  jobs::FsObserver observer;
};

struct MaintenanceReport {
  std::size_t transitions = 0;
  std::vector<delegation::RenewalAction> renewals;
  std::vector<std::string> expired_jobs;
};

/// The HTTP API without the HTTP: routing, authentication, authorization
/// and the mapping of job and delegation errors onto status codes.
///
///   POST   /delegate           framed delegation messages; Ack carries a token
///   POST   /delegate/myproxy   proxy retrieved from the external repository
///   POST   /jobs               multipart: jdl, sandbox (application/gzip)
///   GET    /jobs               the caller's jobs
///   GET    /jobs/{id}          state, color, history; ?wait=N blocks up to N s
///   GET    /jobs/{id}/output   application/gzip
///   DELETE /jobs/{id}          cancel
class Gateway {
 public:
  explicit Gateway(GatewayOptions options);

  ApiResponse handle(const ApiRequest& request);

  AuthDecision authorize(std::string_view token, std::optional<std::string_view> vo, Operation op) const;

  /// One pass of background work: job transitions, delegation session
  /// reaping, proxy renewal, and aborts of jobs whose proxy expired.
  MaintenanceReport maintain();

  struct Restored {
    std::size_t proxies = 0;
    std::size_t tokens = 0;
    std::size_t jobs = 0;
  };
  /// Reloads proxies, tokens and jobs from the state root.
  Restored restore();

  delegation::ProxyStore& proxies() noexcept { return store_; }
  jobs::JobManager& jobs() noexcept { return *jobs_; }
  const TokenTable& tokens() const noexcept { return tokens_; }
  const GatewayOptions& options() const noexcept { return options_; }

 private:
  pki::Timestamp now_seconds() const;

  ApiResponse delegate(const ApiRequest& r);
  ApiResponse delegate_myproxy(const ApiRequest& r);
  ApiResponse submit(const ApiRequest& r, const ApiSession& s);
  ApiResponse list(const ApiSession& s);
  ApiResponse status(const ApiRequest& r, const jobs::JobId& id, const ApiSession& s);
  ApiResponse output(const jobs::JobId& id, const ApiSession& s);
  ApiResponse cancel(const jobs::JobId& id, const ApiSession& s);

  GatewayOptions options_;
  delegation::ProxyStore store_;
  delegation::DelegationService delegation_;
  TokenTable tokens_;
  std::unique_ptr<jobs::JobManager> jobs_;

  mutable std::mutex logins_mu_;
  std::map<pki::UserId, delegation::RepositoryLogin> logins_;
  pki::Timestamp last_renewal_check_{};
};

}  // namespace lgrid::gateway
