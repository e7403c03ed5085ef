// Copyright 2026 The lgrid Authors
// SPDX-License-Identifier: Apache-2.0

#include "lgrid/client/client.hpp"

#include <nlohmann/json.hpp>

namespace lgrid::client {

using nlohmann::json;

namespace {

constexpr std::string_view kTokenHeader = "x-lgrid-token";

JobStatus parse_status(const json& j) {
  JobStatus s;
  s.id = j.at("id");
  s.uuid = j.at("uuid");
  s.short_id = j.value("short_id", s.uuid.substr(0, 8));
  s.state = j.at("state");
  s.color = j.value("color", "neutral");
  s.submitted_at = j.value("submitted_at", "");
  s.last_update = j.value("last_update", "");
  if (j.contains("history")) {
    for (const auto& h : j["history"]) s.history.push_back({h.at("state"), h.at("at"), h.value("reason", "")});
  }
  if (j.contains("exit_code") && j["exit_code"].is_number_integer()) s.exit_code = j["exit_code"].get<int>();
  return s;
}

json parse_body(const net::HttpResponse& r) {
  try {
    return json::parse(r.body);
  } catch (const json::exception&) {
    throw ApiError(r.status, "malformed-response", "gateway sent a body that is not JSON");
  }
}

}  // namespace

bool is_terminal_state(std::string_view s) {
  return s == "DONE_OK" || s == "DONE_FAILED" || s == "ABORTED" || s == "CANCELLED" || s == "CLEARED";
}

std::string job_path_segment(std::string_view id) {
  auto slash = id.rfind('/');
  return std::string(slash == std::string_view::npos ? id : id.substr(slash + 1));
}

GatewayClient::GatewayClient(std::string host, int port, net::ClientTls tls, delegation::InjectedLatency latency)
    : connection_(std::move(host), port, std::move(tls), latency) {}

net::HttpResponse GatewayClient::call(net::HttpRequest r) {
  if (!token_.empty()) r.headers["Authorization"] = "Bearer " + token_;
  if (vo_) r.headers["X-Lgrid-Vo"] = *vo_;
  auto resp = connection_.send(r);
  if (resp.status >= 200 && resp.status < 300) return resp;
  std::string code = "http-" + std::to_string(resp.status);
  std::string detail;
  try {
    auto j = json::parse(resp.body);
    code = j.value("error", code);
    detail = j.value("detail", "");
    if (j.contains("line")) detail += " (line " + std::to_string(j["line"].get<int>()) + ", column " +
                                      std::to_string(j["column"].get<int>()) + ")";
  } catch (const json::exception&) {
  }
  throw ApiError(resp.status, code, r.method + " " + r.path + ": " + code + (detail.empty() ? "" : ": " + detail));
}

Delegation GatewayClient::delegate(const pki::Certificate& cert, const pki::PrivateKey& key,
                                   std::chrono::seconds lifetime,
                                   std::optional<pki::DistinguishedName> expected_server) {
  net::HttpsChannel channel(connection_, "/delegate", std::move(expected_server));
  auto result = delegation::client_delegate(channel, cert, key, lifetime);
  auto it = channel.last_response().headers.find(std::string(kTokenHeader));
  if (it == channel.last_response().headers.end()) {
    throw ApiError(channel.last_response().status, "no-token", "delegation succeeded but no token was issued");
  }
  token_ = it->second;
  return {token_, std::move(result.ack), std::move(result.transcript)};
}

RepositoryLogin GatewayClient::delegate_via_repository(const std::string& username, const std::string& passphrase,
                                                       std::optional<std::chrono::seconds> lifetime) {
  json body{{"username", username}, {"passphrase", passphrase}};
  if (lifetime) body["lifetime_seconds"] = lifetime->count();
  net::HttpRequest r;
  r.method = "POST";
  r.path = "/delegate/myproxy";
  r.body = body.dump();
  r.content_type = "application/json";
  auto j = parse_body(call(std::move(r)));
  RepositoryLogin out;
  out.token = j.at("token");
  out.proxy_fingerprint = j.at("proxy_fingerprint");
  out.not_after = j.at("not_after");
  out.user_dn = j.at("user_dn");
  const auto& up = j.at("upstream");
  out.upstream_connections = up.at("connections");
  out.upstream_round_trips = up.at("round_trips");
  out.upstream_bytes = up.at("bytes");
  token_ = out.token;
  return out;
}

std::vector<SubmittedJob> GatewayClient::submit(const std::string& jdl, const std::vector<jobs::SandboxEntry>& input) {
  net::HttpRequest r;
  r.method = "POST";
  r.path = "/jobs";
  r.parts["jdl"] = {jdl, "text/plain", "job.jdl"};
  if (!input.empty()) r.parts["sandbox"] = {jobs::pack(input), "application/gzip", "sandbox.tar.gz"};
  auto j = parse_body(call(std::move(r)));
  std::vector<SubmittedJob> out;
  for (const auto& e : j.at("jobs")) out.push_back({e.at("id"), e.at("uuid")});
  return out;
}

JobStatus GatewayClient::status(const std::string& id, std::optional<std::chrono::seconds> wait) {
  net::HttpRequest r;
  r.method = "GET";
  r.path = "/jobs/" + job_path_segment(id);
  if (wait) r.query["wait"] = std::to_string(wait->count());
  return parse_status(parse_body(call(std::move(r))));
}

std::vector<JobStatus> GatewayClient::list() {
  net::HttpRequest r;
  r.method = "GET";
  r.path = "/jobs";
  auto j = parse_body(call(std::move(r)));
  std::vector<JobStatus> out;
  for (const auto& e : j.at("jobs")) out.push_back(parse_status(e));
  return out;
}

std::string GatewayClient::output(const std::string& id) {
  net::HttpRequest r;
  r.method = "GET";
  r.path = "/jobs/" + job_path_segment(id) + "/output";
  return call(std::move(r)).body;
}

JobStatus GatewayClient::cancel(const std::string& id) {
  net::HttpRequest r;
  r.method = "DELETE";
  r.path = "/jobs/" + job_path_segment(id);
  return parse_status(parse_body(call(std::move(r))));
}

}  // namespace lgrid::client
