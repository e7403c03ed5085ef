// Copyright 2026 The lgrid Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <variant>

#include "lgrid/delegation/channel.hpp"
#include "lgrid/delegation/message.hpp"
#include "lgrid/pki/proxy.hpp"

namespace lgrid::delegation {

// A minimal external credential repository, used as the baseline the
// embedded flow is compared against. It implements put/get keyed by
// username + passphrase and nothing else of the real MyProxy protocol.
//
//   put: PutRequest -> CsrReply;  SignedProxy -> Ack        (2 round trips)
//   get: GetRequest -> GetGranted; CsrSubmit -> ChainReply  (2 round trips)
//
// Each operation runs on its own connection.

inline constexpr int kMyProxyPort = 7513;

struct Endpoint {
  std::string host = "127.0.0.1";
  int port = kMyProxyPort;
};

struct PutRequest {
  std::string username;
  std::string passphrase;
  std::int64_t retention_seconds = 0;
};

struct GetRequest {
  std::string username;
  std::string passphrase;
  std::int64_t lifetime_seconds = 0;
};

struct GetGranted {
  std::string session_id;
  std::string issuer_dn;  // subject of the stored credential
};

struct CsrSubmit {
  std::string session_id;
  std::string csr_pem;
};

struct ChainReply {
  std::string session_id;
  std::string chain_pem;  // new proxy, then the stored chain
};

using RepositoryMessage = std::variant<PutRequest, GetRequest, GetGranted, CsrSubmit, ChainReply,
                                       CsrReply, SignedProxy, Ack, Fault>;

std::string encode_repository(const RepositoryMessage& m);
RepositoryMessage decode_repository(std::string_view bytes);

namespace fault {
inline constexpr std::string_view kUnknownUser = "unknown-user";
inline constexpr std::string_view kBadPassphrase = "bad-passphrase";
inline constexpr std::string_view kCredentialExpired = "credential-expired";
}  // namespace fault

struct SimulatorConfig {
  std::chrono::seconds max_retention = std::chrono::hours(24 * 7);
  std::chrono::seconds session_deadline{60};
  pki::ProxyOptions proxy;
  std::function<pki::Timestamp()> clock = pki::now_seconds;
};

class MyProxySimulator {
 public:
  explicit MyProxySimulator(pki::TrustStore trust, SimulatorConfig config = {});

  RepositoryMessage handle(const PeerIdentity& peer, const RepositoryMessage& msg);
  std::string handle_frame(const PeerIdentity& peer, std::string_view bytes);

  std::size_t credential_count() const;

 private:
  struct Credential {
    std::string salt;
    std::string passphrase_digest;
    std::string bundle;
    pki::Timestamp not_after;
  };
  struct PutSession {
    PeerIdentity peer;
    std::string username;
    std::string salt;
    std::string passphrase_digest;
    pki::KeyPair key;
    pki::Timestamp deadline;
  };
  struct GetSession {
    std::string username;
    std::chrono::seconds lifetime;
    pki::Timestamp deadline;
  };

  RepositoryMessage on_put(const PeerIdentity& peer, const PutRequest& req, pki::Timestamp now);
  RepositoryMessage on_signed(const PeerIdentity& peer, const SignedProxy& msg, pki::Timestamp now);
  RepositoryMessage on_get(const GetRequest& req, pki::Timestamp now);
  RepositoryMessage on_csr(const CsrSubmit& msg, pki::Timestamp now);

  pki::TrustStore trust_;
  SimulatorConfig config_;
  mutable std::mutex mu_;
  std::map<std::string, Credential> credentials_;
  std::map<std::string, PutSession> puts_;
  std::map<std::string, GetSession> gets_;
};

class MyProxyError : public std::runtime_error {
 public:
  MyProxyError(std::string code, const std::string& what)
      : std::runtime_error(what), code_(std::move(code)) {}
  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

struct PutReceipt {
  std::string username;
  pki::Timestamp not_after;
  std::string fingerprint;
};

/// Delegates a long-lived proxy of the user to the repository. The key
/// stays local; the passphrase travels to the repository.
PutReceipt myproxy_put(Channel& channel, const std::string& username, const std::string& passphrase,
                       const pki::Certificate& user_cert, const pki::PrivateKey& user_key,
                       std::chrono::seconds retention, Transcript* transcript = nullptr);

/// Retrieves a fresh short-lived proxy file signed by the stored credential.
std::string myproxy_get(Channel& channel, const std::string& username,
                        const std::string& passphrase, std::chrono::seconds lifetime,
                        Transcript* transcript = nullptr,
                        pki::KeyAlgorithm algorithm = pki::kDefaultKeyAlgorithm);

}  // namespace lgrid::delegation
