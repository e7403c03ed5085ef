// Copyright 2026 The lgrid Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <condition_variable>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

#include "lgrid/delegation/myproxy.hpp"
#include "lgrid/gateway/config.hpp"
#include "lgrid/gateway/gateway.hpp"
#include "lgrid/net/https.hpp"

namespace lgrid::server {

/// The gateway behind HTTPS, plus a thread that calls maintain() on an
/// interval.
class GatewayServer {
 public:
  GatewayServer(gateway::GatewayOptions options, const net::TlsIdentity& identity,
                std::chrono::milliseconds maintenance_interval = std::chrono::milliseconds(50));
  ~GatewayServer();

  int bind(const std::string& host, int port);
  /// Restores state, then serves on a background thread. Returns what was
  /// restored.
  gateway::Gateway::Restored start();
  void stop();

  int port() const noexcept { return https_.port(); }
  gateway::Gateway& gateway() noexcept { return gateway_; }

 private:
  void maintenance_loop();

  gateway::Gateway gateway_;
  net::HttpsServer https_;
  std::chrono::milliseconds interval_;
  std::thread maintenance_;
  std::mutex mu_;
  std::condition_variable cv_;
  bool stopping_ = false;
};

/// The repository simulator behind HTTPS at POST /myproxy.
class RepositoryServer {
 public:
  RepositoryServer(const pki::TrustStore& trust, const net::TlsIdentity& identity,
                   delegation::SimulatorConfig config = {});

  int bind(const std::string& host, int port);
  void start();
  void serve();
  void stop();

  int port() const noexcept { return https_.port(); }
  delegation::MyProxySimulator& simulator() noexcept { return sim_; }

 private:
  delegation::MyProxySimulator sim_;
  net::HttpsServer https_;
};

inline constexpr std::string_view kRepositoryPath = "/myproxy";

/// Gateway options from a configuration file's settings: reads the host
/// credential and trust anchors and connects the repository, if any.
struct ConfiguredGateway {
  gateway::GatewayOptions options;
  net::TlsIdentity identity;
};
ConfiguredGateway configure(const gateway::GatewayConfig& config);

}  // namespace lgrid::server
