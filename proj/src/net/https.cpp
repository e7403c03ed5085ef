// Copyright 2026 The lgrid Authors
// SPDX-License-Identifier: Apache-2.0

#include "lgrid/net/https.hpp"

#include <openssl/ssl.h>
#include <openssl/x509.h>
#include <openssl/x509_vfy.h>

#include <algorithm>
#include <cctype>

#include <httplib.h>

namespace lgrid::net {

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

pki::Certificate copy_certificate(X509* x) {
  unsigned char* der = nullptr;
  int len = i2d_X509(x, &der);
  if (len <= 0) throw NetError("cannot encode peer certificate");
  std::string bytes(reinterpret_cast<char*>(der), static_cast<std::size_t>(len));
  OPENSSL_free(der);
  return pki::Certificate::from_der(bytes);
}

using StackPtr = std::unique_ptr<STACK_OF(X509), void (*)(STACK_OF(X509)*)>;

StackPtr anchor_stack(const pki::TrustStore& roots) {
  StackPtr sk(sk_X509_new_null(), [](STACK_OF(X509)* s) { sk_X509_pop_free(s, X509_free); });
  for (const auto& a : roots.anchors()) {
    X509_up_ref(a.native());
    sk_X509_push(sk.get(), a.native());
  }
  return sk;
}

HttpRequest to_request(const httplib::Request& req) {
  HttpRequest r;
  r.method = req.method;
  r.path = req.path;
  for (const auto& [k, v] : req.params) r.query.emplace(k, v);
  for (const auto& [k, v] : req.headers) r.headers.emplace(lower(k), v);
  r.body = req.body;
  r.content_type = req.get_header_value("Content-Type");
  for (const auto& [name, file] : req.files) r.parts.emplace(name, FormPart{file.content, file.content_type, file.filename});
  if (req.ssl) {
    if (X509* x = SSL_get1_peer_certificate(req.ssl)) {
      try {
        if (SSL_get_verify_result(req.ssl) == X509_V_OK) {
          auto cert = copy_certificate(x);
          r.peer = delegation::PeerIdentity{cert.subject(), cert};
        }
      } catch (...) {
        X509_free(x);
        throw;
      }
      X509_free(x);
    }
  }
  return r;
}

}  // namespace

// ---------------------------------------------------------------------------

struct HttpsServer::Impl {
  Impl(const TlsIdentity& id, const pki::TrustStore& roots)
      : cert(id.cert), key(id.key), anchors(roots.anchors()),
        server([this](SSL_CTX& ctx) { return setup(ctx); }) {}

  bool setup(SSL_CTX& ctx) {
    SSL_CTX_set_min_proto_version(&ctx, TLS1_2_VERSION);
    if (SSL_CTX_use_certificate(&ctx, cert.native()) != 1 || SSL_CTX_use_PrivateKey(&ctx, key.native()) != 1 ||
        SSL_CTX_check_private_key(&ctx) != 1) {
      return false;
    }
    X509_STORE* store = X509_STORE_new();
    for (const auto& a : anchors) X509_STORE_add_cert(store, a.native());
    SSL_CTX_set_cert_store(&ctx, store);
    // Ask for a certificate but let the handshake proceed without one.
    SSL_CTX_set_verify(&ctx, SSL_VERIFY_PEER, nullptr);
    static const unsigned char kContext[] = "lgrid";
    SSL_CTX_set_session_id_context(&ctx, kContext, sizeof(kContext) - 1);
    return true;
  }

  pki::Certificate cert;
  pki::PrivateKey key;
  std::vector<pki::Certificate> anchors;
  httplib::SSLServer server;
};

HttpsServer::HttpsServer(const TlsIdentity& identity, const pki::TrustStore& client_roots, Handler handler)
    : impl_(std::make_unique<Impl>(identity, client_roots)) {
  if (!impl_->server.is_valid()) throw NetError("TLS server setup failed");
  auto h = [handler = std::move(handler)](const httplib::Request& req, httplib::Response& res) {
    auto out = handler(to_request(req));
    res.status = out.status;
    for (const auto& [k, v] : out.headers) res.set_header(k, v);
    res.set_content(out.body, out.content_type);
  };
  auto& s = impl_->server;
  s.Get(".*", h);
  s.Post(".*", h);
  s.Put(".*", h);
  s.Delete(".*", h);
  s.set_keep_alive_max_count(1000);
  s.set_payload_max_length(std::size_t(1) << 30);
}

HttpsServer::~HttpsServer() { stop(); }

int HttpsServer::bind(const std::string& host, int port) {
  if (port == 0) {
    port_ = impl_->server.bind_to_any_port(host);
    if (port_ <= 0) throw NetError("cannot bind " + host);
  } else {
    if (!impl_->server.bind_to_port(host, port)) throw NetError("cannot bind " + host + ":" + std::to_string(port));
    port_ = port;
  }
  return port_;
}

void HttpsServer::serve() { impl_->server.listen_after_bind(); }

void HttpsServer::start() {
  thread_ = std::thread([this] { serve(); });
  impl_->server.wait_until_ready();
}

void HttpsServer::stop() {
  impl_->server.stop();
  if (thread_.joinable()) thread_.join();
}

// ---------------------------------------------------------------------------

struct HttpsConnection::Impl {
  Impl(std::string h, int p, ClientTls t, delegation::InjectedLatency l)
      : host(std::move(h)), port(p), tls(std::move(t)), latency(l), anchors(anchor_stack(tls.roots)),
        client(tls.identity ? httplib::SSLClient(host, port, tls.identity->cert.native(), tls.identity->key.native())
                            : httplib::SSLClient(host, port)) {
    client.enable_server_certificate_verification(true);
    client.set_keep_alive(true);
    client.set_connection_timeout(10);
    client.set_read_timeout(120);
    SSL_CTX_set_cert_verify_callback(client.ssl_context(), &Impl::verify, this);
  }

  // Runs once per handshake. Verification uses only our anchors, never the
  // system store httplib would otherwise load.
  static int verify(X509_STORE_CTX* ctx, void* arg) {
    auto* self = static_cast<Impl*>(arg);
    self->latency.on_connect();
    ++self->connections;
    self->transcript.add_connections(1);
    X509_STORE_CTX_set0_trusted_stack(ctx, self->anchors.get());
    int ok = X509_verify_cert(ctx);
    if (ok == 1) {
      try {
        self->server_cert = copy_certificate(X509_STORE_CTX_get0_cert(ctx));
      } catch (const std::exception&) {
        X509_STORE_CTX_set_error(ctx, X509_V_ERR_UNSPECIFIED);
        return 0;
      }
    } else {
      self->server_cert.reset();
    }
    return ok == 1 ? 1 : 0;
  }

  std::string host;
  int port;
  ClientTls tls;
  delegation::InjectedLatency latency;
  StackPtr anchors;
  httplib::SSLClient client;
  std::optional<pki::Certificate> server_cert;
  int connections = 0;
  int round_trips = 0;
  delegation::Transcript transcript;
};

HttpsConnection::HttpsConnection(std::string host, int port, ClientTls tls, delegation::InjectedLatency latency)
    : impl_(std::make_unique<Impl>(std::move(host), port, std::move(tls), latency)) {}

HttpsConnection::~HttpsConnection() = default;

HttpResponse HttpsConnection::send(const HttpRequest& request) {
  auto& cli = impl_->client;
  httplib::Headers headers;
  for (const auto& [k, v] : request.headers) headers.emplace(k, v);

  std::string sent = request.body;
  httplib::Result res{nullptr, httplib::Error::Unknown};
  impl_->latency.on_round_trip();
  if (request.method == "GET") {
    httplib::Params params(request.query.begin(), request.query.end());
    res = cli.Get(request.path, params, headers);
  } else if (request.method == "DELETE") {
    res = cli.Delete(request.path, headers);
  } else if (request.method == "POST" || request.method == "PUT") {
    if (!request.parts.empty()) {
      httplib::MultipartFormDataItems items;
      sent.clear();
      for (const auto& [name, p] : request.parts) {
        items.push_back({name, p.content, p.filename, p.content_type});
        sent += p.content;
      }
      res = request.method == "POST" ? cli.Post(request.path, headers, items) : cli.Put(request.path, headers, items);
    } else {
      auto type = request.content_type.empty() ? std::string("application/octet-stream") : request.content_type;
      res = request.method == "POST" ? cli.Post(request.path, headers, request.body, type)
                                     : cli.Put(request.path, headers, request.body, type);
    }
  } else {
    throw NetError("unsupported method " + request.method);
  }

  if (!res) {
    std::string why = httplib::to_string(res.error());
    if (res.error() == httplib::Error::SSLServerVerification) {
      why += ": " + std::string(X509_verify_cert_error_string(cli.get_openssl_verify_result()));
    }
    throw delegation::ChannelError(impl_->host + ":" + std::to_string(impl_->port) + ": " + why);
  }
  ++impl_->round_trips;
  impl_->transcript.add_round_trip();
  impl_->transcript.record(delegation::Direction::kSent, sent);
  impl_->transcript.record(delegation::Direction::kReceived, res->body);

  HttpResponse out;
  out.status = res->status;
  out.body = std::move(res->body);
  out.content_type = res->get_header_value("Content-Type");
  for (const auto& [k, v] : res->headers) out.headers.emplace(lower(k), v);
  return out;
}

const std::optional<pki::Certificate>& HttpsConnection::server_certificate() const noexcept {
  return impl_->server_cert;
}
int HttpsConnection::connections_opened() const noexcept { return impl_->connections; }
int HttpsConnection::round_trips() const noexcept { return impl_->round_trips; }
const delegation::Transcript& HttpsConnection::transcript() const noexcept { return impl_->transcript; }
const std::string& HttpsConnection::host() const noexcept { return impl_->host; }
int HttpsConnection::port() const noexcept { return impl_->port; }

// ---------------------------------------------------------------------------

HttpsChannel::HttpsChannel(HttpsConnection& connection, std::string path,
                           std::optional<pki::DistinguishedName> expected_server,
                           std::map<std::string, std::string> headers)
    : connection_(connection), path_(std::move(path)), expected_(std::move(expected_server)),
      headers_(std::move(headers)), base_connections_(connection.connections_opened()) {}

std::string HttpsChannel::round_trip(std::string_view frame) {
  HttpRequest r;
  r.method = "POST";
  r.path = path_;
  r.headers = headers_;
  r.body = std::string(frame);
  r.content_type = "application/octet-stream";
  last_ = connection_.send(r);

  const auto& cert = connection_.server_certificate();
  if (!cert) throw delegation::ChannelError("server presented no verified certificate");
  peer_ = delegation::PeerIdentity{cert->subject(), *cert};
  if (expected_ && !(peer_->dn == *expected_)) {
    throw delegation::ChannelError("server is " + peer_->dn.str() + ", expected " + expected_->str());
  }
  if (last_.content_type != "application/octet-stream") {
    throw delegation::ChannelError("HTTP " + std::to_string(last_.status) + " from " + path_ + ": " + last_.body);
  }
  return last_.body;
}

const delegation::PeerIdentity& HttpsChannel::peer() const {
  if (!peer_) throw delegation::ChannelError("no round trip yet");
  return *peer_;
}

int HttpsChannel::connections_opened() const { return connection_.connections_opened() - base_connections_; }

namespace {

class OwningChannel final : public delegation::Channel {
 public:
  OwningChannel(std::unique_ptr<HttpsConnection> c, std::string path, std::optional<pki::DistinguishedName> expected)
      : connection_(std::move(c)), channel_(*connection_, std::move(path), std::move(expected)) {}

  std::string round_trip(std::string_view frame) override { return channel_.round_trip(frame); }
  const delegation::PeerIdentity& peer() const override { return channel_.peer(); }
  int connections_opened() const override { return channel_.connections_opened(); }

 private:
  std::unique_ptr<HttpsConnection> connection_;
  HttpsChannel channel_;
};

}  // namespace

std::unique_ptr<delegation::Channel> open_channel(const std::string& host, int port, ClientTls tls, std::string path,
                                                  delegation::InjectedLatency latency,
                                                  std::optional<pki::DistinguishedName> expected_server) {
  return std::make_unique<OwningChannel>(std::make_unique<HttpsConnection>(host, port, std::move(tls), latency),
                                         std::move(path), std::move(expected_server));
}

}  // namespace lgrid::net
