// Copyright 2026 The lgrid Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>

#include "lgrid/delegation/renewal.hpp"
#include "lgrid/gateway/policy.hpp"

namespace lgrid::gateway {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kDefaultPort = 8443;

/// Gateway settings. The file is a small TOML subset:
///
///   port = 8443
///   state_root = "/var/lib/lgrid"
///   host_cert = "hostcert.pem"
///   host_key = "hostkey.pem"
///   trust_anchors = "ca.pem"
///   executor = "local"            # or "scripted"
///   myproxy = "127.0.0.1:7513"
///
///   [vo.test]
///   members = ["/C=IT/O=Test/*"]
///   operations = ["submit", "status", "output", "cancel"]
///
/// Relative paths resolve against the file's directory.
struct GatewayConfig {
  std::string listen = "0.0.0.0";
  int port = kDefaultPort;
  std::filesystem::path state_root;
  std::string host_name = "localhost";
  std::filesystem::path host_cert;
  std::filesystem::path host_key;
  std::filesystem::path trust_anchors;

  std::string executor = "scripted";
  std::chrono::milliseconds stage_delay{200};
  std::chrono::seconds session_deadline{60};
  std::chrono::milliseconds maintenance_interval{50};

  delegation::RenewalPolicy renewal;
  /// Artificial latency on the gateway's own repository connections.
  std::chrono::milliseconds myproxy_rtt{0};

  VoPolicy policy;
};

/// State root when the file does not set one: $LGRID_STATE_ROOT, else ./lgrid-state.
std::filesystem::path default_state_root();

GatewayConfig parse_config(std::string_view text, const std::filesystem::path& base_dir = {});
GatewayConfig load_config(const std::filesystem::path& file);

}  // namespace lgrid::gateway
