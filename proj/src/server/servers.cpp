// Copyright 2026 The lgrid Authors
// SPDX-License-Identifier: Apache-2.0

#include "lgrid/server/servers.hpp"

#include <fstream>
#include <iostream>
#include <sstream>

#include "lgrid/delegation/message.hpp"
#include "lgrid/pki/credential.hpp"

namespace lgrid::server {

GatewayServer::GatewayServer(gateway::GatewayOptions options, const net::TlsIdentity& identity,
                             std::chrono::milliseconds maintenance_interval)
    : gateway_(std::move(options)),
      https_(identity, gateway_.options().trust, [this](const net::HttpRequest& r) { return gateway_.handle(r); }),
      interval_(maintenance_interval) {}

GatewayServer::~GatewayServer() { stop(); }

int GatewayServer::bind(const std::string& host, int port) { return https_.bind(host, port); }

gateway::Gateway::Restored GatewayServer::start() {
  auto restored = gateway_.restore();
  maintenance_ = std::thread([this] { maintenance_loop(); });
  https_.start();
  return restored;
}

void GatewayServer::stop() {
  {
    std::lock_guard lock(mu_);
    stopping_ = true;
  }
  cv_.notify_all();
  https_.stop();
  if (maintenance_.joinable()) maintenance_.join();
}

void GatewayServer::maintenance_loop() {
  std::unique_lock lock(mu_);
  while (!stopping_) {
    lock.unlock();
    try {
      gateway_.maintain();
    } catch (const std::exception& e) {
      std::cerr << "lgrid: maintenance: " << e.what() << "\n";
    }
    lock.lock();
    cv_.wait_for(lock, interval_, [this] { return stopping_; });
  }
}

RepositoryServer::RepositoryServer(const pki::TrustStore& trust, const net::TlsIdentity& identity,
                                   delegation::SimulatorConfig config)
    : sim_(trust, std::move(config)), https_(identity, trust, [this](const net::HttpRequest& r) {
        if (r.method != "POST" || r.path != kRepositoryPath) return net::HttpResponse{404, "text/plain", "no route\n", {}};
        static const delegation::PeerIdentity anonymous{pki::parse_dn("/CN=anonymous"), std::nullopt};
        return net::HttpResponse{200, "application/octet-stream", sim_.handle_frame(r.peer ? *r.peer : anonymous, r.body), {}};
      }) {}

int RepositoryServer::bind(const std::string& host, int port) { return https_.bind(host, port); }
void RepositoryServer::start() { https_.start(); }
void RepositoryServer::serve() { https_.serve(); }
void RepositoryServer::stop() { https_.stop(); }

namespace {

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw gateway::ConfigError("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

ConfiguredGateway configure(const gateway::GatewayConfig& c) {
  if (c.host_cert.empty() || c.host_key.empty() || c.trust_anchors.empty()) {
    throw gateway::ConfigError("host_cert, host_key and trust_anchors are required");
  }
  auto cred = pki::load_user_credential(c.host_cert, c.host_key);
  auto trust = pki::TrustStore(pki::Certificate::all_from_pem(read_file(c.trust_anchors)));
  net::TlsIdentity identity{cred.cert, cred.key};

  gateway::GatewayOptions o;
  o.state_root = c.state_root;
  o.host_name = c.host_name;
  o.trust = trust;
  o.policy = c.policy;
  o.session_deadline = c.session_deadline;
  o.renewal = c.renewal;
  if (c.executor == "local") {
    o.executor = std::make_shared<jobs::LocalExecutor>();
  } else {
    o.executor = std::make_shared<jobs::ScriptedExecutor>(jobs::ScriptedConfig{c.stage_delay, {}});
  }
  if (auto ep = c.renewal.external_endpoint) {
    net::ClientTls tls{trust, identity};
    delegation::InjectedLatency latency{c.myproxy_rtt};
    o.repository = [ep = *ep, tls, latency] {
      return net::open_channel(ep.host, ep.port, tls, std::string(kRepositoryPath), latency);
    };
  }
  return {std::move(o), std::move(identity)};
}

}  // namespace lgrid::server
