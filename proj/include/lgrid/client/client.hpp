// Copyright 2026 The lgrid Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "lgrid/delegation/client.hpp"
#include "lgrid/jobs/sandbox.hpp"
#include "lgrid/net/https.hpp"

namespace lgrid::client {

/// A non-2xx answer from the gateway.
class ApiError : public std::runtime_error {
 public:
  ApiError(int status, std::string code, const std::string& what)
      : std::runtime_error(what), status_(status), code_(std::move(code)) {}

  int status() const noexcept { return status_; }
  /// The "error" field of the body, e.g. "not-found" or "proxy-expired".
  const std::string& code() const noexcept { return code_; }

 private:
  int status_;
  std::string code_;
};

struct HistoryItem {
  std::string state;
  std::string at;
  std::string reason;
};

struct JobStatus {
  std::string id;
  std::string uuid;
  std::string short_id;
  std::string state;
  std::string color;
  std::string submitted_at;
  std::string last_update;
  std::vector<HistoryItem> history;  // empty in listings
  std::optional<int> exit_code;
};

bool is_terminal_state(std::string_view state);

struct SubmittedJob {
  std::string id;
  std::string uuid;
};

struct Delegation {
  std::string token;
  delegation::Ack ack;
  delegation::Transcript transcript;
};

/// What the gateway reports after fetching a proxy from the repository.
struct RepositoryLogin {
  std::string token;
  std::string proxy_fingerprint;
  std::int64_t not_after = 0;
  std::string user_dn;
  int upstream_connections = 0;
  int upstream_round_trips = 0;
  std::size_t upstream_bytes = 0;
};

/// Typed calls against the gateway's HTTP API over one HttpsConnection.
class GatewayClient {
 public:
  GatewayClient(std::string host, int port, net::ClientTls tls, delegation::InjectedLatency latency = {});

  /// Embedded delegation. The connection must carry the user's certificate.
  Delegation delegate(const pki::Certificate& cert, const pki::PrivateKey& key, std::chrono::seconds lifetime,
                      std::optional<pki::DistinguishedName> expected_server = std::nullopt);
  /// Asks the gateway to fetch a proxy from its repository.
  RepositoryLogin delegate_via_repository(const std::string& username, const std::string& passphrase,
                                          std::optional<std::chrono::seconds> lifetime = std::nullopt);

  void set_token(std::string token) { token_ = std::move(token); }
  const std::string& token() const noexcept { return token_; }
  void set_vo(std::optional<std::string> vo) { vo_ = std::move(vo); }

  std::vector<SubmittedJob> submit(const std::string& jdl, const std::vector<jobs::SandboxEntry>& input = {});
  /// With `wait`, the gateway holds the request until the job is terminal
  /// or the wait runs out.
  JobStatus status(const std::string& id, std::optional<std::chrono::seconds> wait = std::nullopt);
  std::vector<JobStatus> list();
  /// The output sandbox, gzip-compressed tar.
  std::string output(const std::string& id);
  JobStatus cancel(const std::string& id);

  net::HttpsConnection& connection() noexcept { return connection_; }

 private:
  net::HttpResponse call(net::HttpRequest r);

  net::HttpsConnection connection_;
  std::string token_;
  std::optional<std::string> vo_;
};

/// Path segment for a job: the uuid of a full lgrid:// id, else `id` itself.
std::string job_path_segment(std::string_view id);

}  // namespace lgrid::client
