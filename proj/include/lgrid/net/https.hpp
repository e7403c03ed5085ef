// Copyright 2026 The lgrid Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <thread>

#include "lgrid/delegation/channel.hpp"
#include "lgrid/net/http.hpp"
#include "lgrid/pki/certificate.hpp"
#include "lgrid/pki/keys.hpp"
#include "lgrid/pki/proxy.hpp"

namespace lgrid::net {

struct TlsIdentity {
  pki::Certificate cert;
  pki::PrivateKey key;
};

class NetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// HTTPS front end. Client certificates are requested and verified against
/// `client_roots` but not required; requests arrive with `peer` set only when
/// one was presented.
class HttpsServer {
 public:
  using Handler = std::function<HttpResponse(const HttpRequest&)>;

  HttpsServer(const TlsIdentity& identity, const pki::TrustStore& client_roots, Handler handler);
  ~HttpsServer();
  HttpsServer(const HttpsServer&) = delete;
  HttpsServer& operator=(const HttpsServer&) = delete;

  /// Port 0 picks a free port. Returns the bound port.
  int bind(const std::string& host, int port);
  /// Serves until stop(). Requires bind().
  void serve();
  /// serve() on a background thread.
  void start();
  void stop();
  int port() const noexcept { return port_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::thread thread_;
  int port_ = 0;
};

struct ClientTls {
  pki::TrustStore roots;
  /// Presented when the server asks; needed only for delegation.
  std::optional<TlsIdentity> identity;
};

/// One keep-alive HTTPS connection to one server, reopened transparently
/// when the server closes it. Counts connections and round trips, and
/// applies injected latency to each.
class HttpsConnection {
 public:
  HttpsConnection(std::string host, int port, ClientTls tls, delegation::InjectedLatency latency = {});
  ~HttpsConnection();
  HttpsConnection(const HttpsConnection&) = delete;
  HttpsConnection& operator=(const HttpsConnection&) = delete;

  /// One round trip. `parts` turn the request into multipart/form-data.
  /// Throws delegation::ChannelError when the server cannot be reached or
  /// fails TLS verification.
  HttpResponse send(const HttpRequest& request);

  /// The verified server certificate of the most recent connection.
  const std::optional<pki::Certificate>& server_certificate() const noexcept;
  int connections_opened() const noexcept;
  int round_trips() const noexcept;
  /// Request and response bodies, as sent and received.
  const delegation::Transcript& transcript() const noexcept;

  const std::string& host() const noexcept;
  int port() const noexcept;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// delegation::Channel over POST requests to one path. The peer is the
/// server certificate's subject; with `expected_server` set, a reply from
/// any other server is rejected before it reaches the caller.
class HttpsChannel final : public delegation::Channel {
 public:
  HttpsChannel(HttpsConnection& connection, std::string path,
               std::optional<pki::DistinguishedName> expected_server = std::nullopt,
               std::map<std::string, std::string> headers = {});

  std::string round_trip(std::string_view frame) override;
  const delegation::PeerIdentity& peer() const override;
  int connections_opened() const override;

  /// The full response to the latest round trip.
  const HttpResponse& last_response() const noexcept { return last_; }

 private:
  HttpsConnection& connection_;
  std::string path_;
  std::optional<pki::DistinguishedName> expected_;
  std::map<std::string, std::string> headers_;
  HttpResponse last_;
  std::optional<delegation::PeerIdentity> peer_;
  int base_connections_;
};

/// A fresh connection wrapped as a channel that owns it, for use as a
/// delegation::ChannelFactory product.
std::unique_ptr<delegation::Channel> open_channel(const std::string& host, int port, ClientTls tls, std::string path,
                                                  delegation::InjectedLatency latency = {},
                                                  std::optional<pki::DistinguishedName> expected_server = std::nullopt);

}  // namespace lgrid::net
