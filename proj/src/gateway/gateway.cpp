// Copyright 2026 The lgrid Authors
// SPDX-License-Identifier: Apache-2.0

#include "lgrid/gateway/gateway.hpp"

#include <iostream>
#include <thread>

#include <nlohmann/json.hpp>

#include "lgrid/delegation/message.hpp"
#include "lgrid/delegation/myproxy.hpp"

namespace lgrid::gateway {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr auto kMaxWait = std::chrono::seconds(60);

ApiResponse json_response(int status, const json& body) {
  return ApiResponse{status, "application/json", body.dump() + "\n", {}};
}

ApiResponse error(int status, std::string_view code, const std::string& detail = {}) {
  json body{{"error", code}};
  if (!detail.empty()) body["detail"] = detail;
  return json_response(status, body);
}

int status_for(jobs::JobError::Kind k) {
  using K = jobs::JobError::Kind;
  switch (k) {
    case K::kNotAuthorized:
      return 403;
    case K::kInvalid:
    case K::kSandbox:
      return 400;
    case K::kNotFound:
    case K::kNotOwner:
      return 404;  // other users' jobs are indistinguishable from absent ones
    case K::kWrongState:
    case K::kAlreadyTerminal:
      return 409;
  }
  return 500;
}

std::string_view error_code_for(jobs::JobError::Kind k) {
  return k == jobs::JobError::Kind::kNotOwner ? to_string(jobs::JobError::Kind::kNotFound) : to_string(k);
}

int status_for_fault(std::string_view code) {
  namespace f = delegation::fault;
  if (code == f::kDnMismatch) return 403;
  if (code == f::kBadState || code == f::kKeyMismatch) return 409;
  if (code == f::kSessionExpired) return 410;
  if (code == f::kUnknownSession) return 404;
  if (code == f::kValidationFailed) return 422;
  if (code == f::kMalformed) return 400;
  if (code == f::kUnauthenticated) return 401;
  return 500;
}

std::vector<std::string> split_path(std::string_view path) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < path.size()) {
    auto j = path.find('/', i);
    if (j == std::string_view::npos) j = path.size();
    if (j > i) out.emplace_back(path.substr(i, j - i));
    i = j + 1;
  }
  return out;
}

std::optional<std::string> bearer_token(const ApiRequest& r) {
  auto it = r.headers.find("authorization");
  if (it == r.headers.end()) return std::nullopt;
  std::string_view v = it->second;
  constexpr std::string_view kPrefix = "Bearer ";
  if (v.substr(0, kPrefix.size()) != kPrefix) return std::nullopt;
  return std::string(v.substr(kPrefix.size()));
}

json job_view(const jobs::JobRecord& r) {
  return json{{"id", r.id.str()},
              {"uuid", r.id.uuid},
              {"short_id", r.id.uuid.substr(0, 8)},
              {"state", jobs::to_string(r.state)},
              {"color", jobs::display_color(r.state)},
              {"submitted_at", jobs::format_iso8601(r.history.front().at)},
              {"last_update", jobs::format_iso8601(r.history.back().at)}};
}

json job_detail(const jobs::JobRecord& r) {
  auto j = job_view(r);
  json history = json::array();
  for (const auto& h : r.history) {
    history.push_back({{"state", jobs::to_string(h.state)}, {"at", jobs::format_iso8601(h.at)}, {"reason", h.reason}});
  }
  j["history"] = std::move(history);
  j["batch"] = r.batch;
  j["exit_code"] = r.exit_code ? json(*r.exit_code) : json(nullptr);
  return j;
}

}  // namespace

Gateway::Gateway(GatewayOptions options)
    : options_(std::move(options)),
      store_(options_.trust, options_.proxy_options, options_.state_root / "proxies"),
      delegation_(store_, delegation::ServiceConfig{options_.session_deadline, pki::kDefaultKeyAlgorithm,
                                                    [this] { return now_seconds(); }}),
      tokens_(options_.state_root / "journal.log") {
  if (!options_.executor) options_.executor = std::make_shared<jobs::ScriptedExecutor>();
  jobs::ManagerConfig mc;
  mc.state_root = options_.state_root;
  mc.host = options_.host_name;
  mc.clock = options_.clock;
  mc.observer = options_.observer;
  mc.proxy_lookup = [this](const pki::UserId& user) -> std::optional<std::string> {
    if (!store_.valid_at(user, now_seconds())) return std::nullopt;
    auto p = store_.get(user);
    return p ? std::optional<std::string>(p->fingerprint) : std::nullopt;
  };
  jobs_ = std::make_unique<jobs::JobManager>(std::move(mc), options_.executor);
}

pki::Timestamp Gateway::now_seconds() const {
  return std::chrono::time_point_cast<std::chrono::seconds>(options_.clock());
}

Gateway::Restored Gateway::restore() {
  Restored r;
  r.proxies = store_.load();
  r.tokens = tokens_.load();
  r.jobs = jobs_->reload();
  return r;
}

AuthDecision Gateway::authorize(std::string_view token, std::optional<std::string_view> vo, Operation op) const {
  auto session = tokens_.lookup(token);
  if (!session) return {std::nullopt, deny::kInvalidToken};
  if (!store_.valid_at(session->user, now_seconds())) return {std::nullopt, deny::kProxyExpired};
  if (auto reason = options_.policy.check(session->dn, vo, op)) return {std::nullopt, *reason};
  return {std::move(session), {}};
}

ApiResponse Gateway::handle(const ApiRequest& r) {
  try {
    auto parts = split_path(r.path);
    if (!parts.empty() && parts[0] == "delegate") {
      if (r.method != "POST") return error(405, "method-not-allowed");
      if (parts.size() == 1) return delegate(r);
      if (parts.size() == 2 && parts[1] == "myproxy") return delegate_myproxy(r);
      return error(404, "no-route");
    }
    if (parts.empty() || parts[0] != "jobs" || parts.size() > 3 || (parts.size() == 3 && parts[2] != "output")) {
      return error(404, "no-route");
    }

    Operation op;
    if (parts.size() == 1) {
      if (r.method == "POST") {
        op = Operation::kSubmit;
      } else if (r.method == "GET") {
        op = Operation::kStatus;
      } else {
        return error(405, "method-not-allowed");
      }
    } else if (parts.size() == 2) {
      if (r.method == "GET") {
        op = Operation::kStatus;
      } else if (r.method == "DELETE") {
        op = Operation::kCancel;
      } else {
        return error(405, "method-not-allowed");
      }
    } else {
      if (r.method != "GET") return error(405, "method-not-allowed");
      op = Operation::kOutput;
    }

    auto token = bearer_token(r);
    std::optional<std::string_view> vo;
    if (auto it = r.headers.find(std::string(kVoHeader)); it != r.headers.end()) vo = it->second;
    auto decision = authorize(token.value_or(""), vo, op);
    if (!decision.allowed()) return error(decision.reason == deny::kInvalidToken ? 401 : 403, decision.reason);
    const auto& session = *decision.session;

    if (parts.size() == 1) return op == Operation::kSubmit ? submit(r, session) : list(session);
    auto id = jobs_->resolve(parts[1]);
    if (!id) return error(404, "not-found");
    switch (op) {
      case Operation::kStatus:
        return status(r, *id, session);
      case Operation::kCancel:
        return cancel(*id, session);
      case Operation::kOutput:
        return output(*id, session);
      case Operation::kSubmit:
        break;
    }
    return error(404, "no-route");
  } catch (const jobs::JobError& e) {
    return error(status_for(e.kind()), error_code_for(e.kind()),
                 e.kind() == jobs::JobError::Kind::kNotOwner ? "" : e.what());
  } catch (const std::exception& e) {
    std::cerr << "lgrid: " << r.method << " " << r.path << ": " << e.what() << "\n";
    return error(500, "internal");
  }
}

ApiResponse Gateway::delegate(const ApiRequest& r) {
  ApiResponse out{200, "application/octet-stream", {}, {}};
  if (!r.peer || !r.peer->certificate) {
    out.status = 401;
    out.body = delegation::encode(
        delegation::make_fault(delegation::fault::kUnauthenticated, "delegation requires a client certificate"));
    return out;
  }
  out.body = delegation_.handle_frame(*r.peer, r.body);
  delegation::Message reply = delegation::make_fault(delegation::fault::kInternal, "");
  try {
    reply = delegation::decode(out.body);
  } catch (const std::exception&) {
    out.status = 500;
    return out;
  }
  if (auto* fault = std::get_if<delegation::Fault>(&reply)) {
    out.status = status_for_fault(fault->code);
  } else if (std::holds_alternative<delegation::Ack>(reply)) {
    out.headers[std::string(kTokenHeader)] = tokens_.issue(r.peer->dn, now_seconds());
  }
  return out;
}

ApiResponse Gateway::delegate_myproxy(const ApiRequest& r) {
  if (!options_.repository) return error(503, "no-repository", "this gateway has no external repository");
  std::string username, passphrase;
  std::chrono::seconds lifetime = options_.renewal.lifetime;
  try {
    auto j = json::parse(r.body);
    username = j.at("username").get<std::string>();
    passphrase = j.at("passphrase").get<std::string>();
    if (j.contains("lifetime_seconds")) lifetime = std::chrono::seconds(j["lifetime_seconds"].get<std::int64_t>());
  } catch (const std::exception& e) {
    return error(400, "malformed", e.what());
  }
  if (lifetime.count() <= 0) return error(400, "malformed", "lifetime must be positive");

  delegation::Transcript upstream;
  std::string bundle;
  try {
    auto channel = options_.repository();
    bundle = delegation::myproxy_get(*channel, username, passphrase, lifetime, &upstream);
  } catch (const delegation::MyProxyError& e) {
    return error(403, e.code(), e.what());
  } catch (const delegation::ChannelError& e) {
    return error(502, "repository-unreachable", e.what());
  }

  auto user_dn = pki::parse_proxy_bundle(bundle).user_dn();
  if (r.peer && r.peer->certificate && r.peer->dn != user_dn) {
    return error(403, delegation::fault::kDnMismatch, "retrieved credential belongs to " + user_dn.str());
  }
  std::optional<delegation::StoredProxy> stored;
  try {
    stored = store_.put(bundle, now_seconds());
  } catch (const delegation::StoreError& e) {
    return error(422, delegation::fault::kValidationFailed, e.report().summary());
  }
  {
    std::lock_guard lock(logins_mu_);
    logins_.insert_or_assign(pki::derive_user_id(user_dn), delegation::RepositoryLogin{username, passphrase});
  }
  json body{{"token", tokens_.issue(user_dn, now_seconds())},
            {"proxy_fingerprint", stored->fingerprint},
            {"not_after", stored->not_after.time_since_epoch().count()},
            {"user_dn", user_dn.str()},
            {"upstream",
             {{"connections", upstream.connection_count()},
              {"round_trips", upstream.round_trip_count()},
              {"bytes", upstream.total_bytes()}}}};
  return json_response(200, body);
}

ApiResponse Gateway::submit(const ApiRequest& r, const ApiSession& s) {
  auto jdl = r.parts.find("jdl");
  if (jdl == r.parts.end()) return error(400, "missing-jdl", "multipart part \"jdl\" is required");
  jobs::JobDescriptor descriptor;
  try {
    descriptor = jobs::parse_jdl(jdl->second.content);
  } catch (const jobs::JdlError& e) {
    auto resp = error(400, "invalid-descriptor", e.what());
    auto body = json::parse(resp.body);
    body["line"] = e.line();
    body["column"] = e.column();
    return json_response(400, body);
  }
  std::vector<jobs::SandboxEntry> input;
  if (auto sb = r.parts.find("sandbox"); sb != r.parts.end() && !sb->second.content.empty()) {
    try {
      input = jobs::unpack(sb->second.content);
    } catch (const jobs::SandboxError& e) {
      return error(400, "sandbox-rejected", e.what());
    }
  }
  auto ids = jobs_->submit(descriptor, s.dn, input);
  json list = json::array();
  for (const auto& id : ids) list.push_back({{"id", id.str()}, {"uuid", id.uuid}});
  return json_response(201, json{{"jobs", list}});
}

ApiResponse Gateway::list(const ApiSession& s) {
  json list = json::array();
  for (const auto& r : jobs_->list(s.dn)) list.push_back(job_view(r));
  return json_response(200, json{{"jobs", list}});
}

ApiResponse Gateway::status(const ApiRequest& r, const jobs::JobId& id, const ApiSession& s) {
  auto record = jobs_->status(id, s.dn);
  if (auto w = r.query.find("wait"); w != r.query.end()) {
    std::chrono::seconds wait{0};
    try {
      wait = std::min<std::chrono::seconds>(std::chrono::seconds(std::stoll(w->second)), kMaxWait);
    } catch (const std::exception&) {
      return error(400, "malformed", "wait must be a number of seconds");
    }
    auto deadline = std::chrono::steady_clock::now() + wait;
    while (!jobs::is_terminal(record.state) && std::chrono::steady_clock::now() < deadline) {
      if (!jobs_->advance(id)) std::this_thread::sleep_for(std::chrono::milliseconds(5));
      record = jobs_->status(id, s.dn);
    }
  }
  return json_response(200, job_detail(record));
}

ApiResponse Gateway::output(const jobs::JobId& id, const ApiSession& s) {
  return ApiResponse{200, "application/gzip", jobs_->fetch_output(id, s.dn), {}};
}

ApiResponse Gateway::cancel(const jobs::JobId& id, const ApiSession& s) {
  return json_response(200, job_detail(jobs_->cancel(id, s.dn)));
}

MaintenanceReport Gateway::maintain() {
  MaintenanceReport report;
  auto now = now_seconds();
  report.transitions = jobs_->tick();
  delegation_.reap(now);

  std::vector<delegation::ActiveJob> active;
  for (const auto& r : jobs_->snapshot()) {
    if (!jobs::is_terminal(r.state)) active.push_back({r.id.str(), r.owner});
  }

  if (!active.empty() && now - last_renewal_check_ >= options_.renewal.check_interval) {
    last_renewal_check_ = now;
    std::unique_ptr<delegation::RenewalSource> source;
    if (options_.repository) {
      source = std::make_unique<delegation::RepositoryRenewalSource>(
          options_.repository, [this](const pki::UserId& u) -> std::optional<delegation::RepositoryLogin> {
            std::lock_guard lock(logins_mu_);
            auto it = logins_.find(u);
            if (it == logins_.end()) return std::nullopt;
            return it->second;
          });
    }
    report.renewals = delegation::renew_if_needed(store_, active, options_.renewal, now, source.get());
    for (const auto& a : report.renewals) {
      std::cerr << "lgrid: proxy of " << a.user.str() << " " << delegation::to_string(a.outcome)
                << (a.detail.empty() ? "" : ": " + a.detail) << "\n";
    }
  }

  for (const auto& job : active) {
    if (store_.valid_at(job.owner, now)) continue;
    if (auto id = jobs_->resolve(job.job_id); id && jobs_->abort(*id, "proxy-expired")) {
      report.expired_jobs.push_back(job.job_id);
    }
  }
  return report;
}

}  // namespace lgrid::gateway
