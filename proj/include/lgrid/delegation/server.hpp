// Copyright 2026 The lgrid Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <variant>

#include "lgrid/delegation/channel.hpp"
#include "lgrid/delegation/message.hpp"
#include "lgrid/delegation/proxy_store.hpp"

namespace lgrid::delegation {

enum class SessionState { kAwaitInit, kAwaitSigned, kDone, kFailed };

std::string_view to_string(SessionState s);

/// The declared edges: AWAIT_INIT -> AWAIT_SIGNED -> DONE, and any -> FAILED.
bool is_declared_transition(SessionState from, SessionState to);

/// Server half of one delegation: generates the fresh key pair, issues the
/// CSR, and turns the signed certificate into a proxy file.
///
/// Faults raised before DONE move the session to FAILED. DONE and FAILED are
/// final; anything arriving afterwards is answered with bad-state.
class DelegationSession {
 public:
  DelegationSession(std::string id, PeerIdentity peer, pki::Timestamp deadline,
                    pki::KeyAlgorithm algorithm = pki::kDefaultKeyAlgorithm);

  struct Completed {
    Ack ack;
    std::string bundle;
  };

  /// Returns CsrReply or Fault.
  Message on_init(const Init& msg, pki::Timestamp now);
  /// Assembles and validates the proxy file. Returns Completed or Fault.
  std::variant<Completed, Fault> on_signed_proxy(const SignedProxy& msg, const pki::TrustStore& trust,
                                                 const pki::ProxyOptions& options,
                                                 pki::Timestamp now);
  /// Answer to a message that has no handler in this session.
  Fault on_unexpected(const Message& msg);

  const std::string& id() const noexcept { return id_; }
  const PeerIdentity& peer() const noexcept { return peer_; }
  SessionState state() const noexcept { return state_; }
  pki::Timestamp deadline() const noexcept { return deadline_; }
  bool has_keypair() const noexcept { return fresh_.has_value(); }
  const std::optional<pki::CertificateSigningRequest>& csr() const noexcept { return csr_; }

 private:
  Fault fail(std::string_view code, std::string detail);
  std::optional<Fault> check_live(pki::Timestamp now);

  std::string id_;
  PeerIdentity peer_;
  pki::Timestamp deadline_;
  pki::KeyAlgorithm algorithm_;
  SessionState state_ = SessionState::kAwaitInit;
  std::optional<pki::KeyPair> fresh_;
  std::optional<pki::CertificateSigningRequest> csr_;
};

struct ServiceConfig {
  std::chrono::seconds session_deadline{60};
  pki::KeyAlgorithm key_algorithm = pki::kDefaultKeyAlgorithm;
  std::function<pki::Timestamp()> clock = pki::now_seconds;
};

/// The embedded delegation endpoint. Init opens a session; later messages are
/// routed by session id and must come from the same authenticated peer.
/// Completed delegations land in the ProxyStore keyed by the peer's UserId.
class DelegationService {
 public:
  DelegationService(ProxyStore& store, ServiceConfig config = {});

  Message handle(const PeerIdentity& peer, const Message& msg);
  /// Frame-level entry point for transports.
  std::string handle_frame(const PeerIdentity& peer, std::string_view frame);

  /// Drops sessions past their deadline.
  std::size_t reap(pki::Timestamp now);
  std::size_t session_count() const;

 private:
  ProxyStore& store_;
  ServiceConfig config_;
  struct Entry;

  std::shared_ptr<Entry> find(const std::string& id) const;

  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<Entry>> sessions_;
};

}  // namespace lgrid::delegation
