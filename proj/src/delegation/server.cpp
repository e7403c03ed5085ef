// Copyright 2026 The lgrid Authors
// SPDX-License-Identifier: Apache-2.0

#include "lgrid/delegation/server.hpp"

#include "lgrid/pki/digest.hpp"

namespace lgrid::delegation {

std::string_view to_string(SessionState s) {
  switch (s) {
    case SessionState::kAwaitInit:
      return "AWAIT_INIT";
    case SessionState::kAwaitSigned:
      return "AWAIT_SIGNED";
    case SessionState::kDone:
      return "DONE";
    case SessionState::kFailed:
      return "FAILED";
  }
  return "?";
}

bool is_declared_transition(SessionState from, SessionState to) {
  if (to == SessionState::kFailed) return true;
  return (from == SessionState::kAwaitInit && to == SessionState::kAwaitSigned) ||
         (from == SessionState::kAwaitSigned && to == SessionState::kDone);
}

// ---- DelegationSession ----

DelegationSession::DelegationSession(std::string id, PeerIdentity peer, pki::Timestamp deadline,
                                     pki::KeyAlgorithm algorithm)
    : id_(std::move(id)), peer_(std::move(peer)), deadline_(deadline), algorithm_(algorithm) {}

Fault DelegationSession::fail(std::string_view code, std::string detail) {
  if (state_ != SessionState::kDone) {
    state_ = SessionState::kFailed;
    fresh_.reset();
  }
  return make_fault(code, std::move(detail));
}

std::optional<Fault> DelegationSession::check_live(pki::Timestamp now) {
  if (state_ == SessionState::kDone || state_ == SessionState::kFailed) {
    return make_fault(fault::kBadState, "session " + id_ + " is " + std::string(to_string(state_)));
  }
  if (now > deadline_) return fail(fault::kSessionExpired, "session deadline passed");
  return std::nullopt;
}

Message DelegationSession::on_init(const Init& msg, pki::Timestamp now) {
  if (auto f = check_live(now)) return *f;
  if (state_ != SessionState::kAwaitInit) return fail(fault::kBadState, "Init already received");

  std::optional<pki::DistinguishedName> claimed;
  try {
    claimed = pki::parse_dn(msg.subject_dn);
  } catch (const pki::DnParseError& e) {
    return fail(fault::kMalformed, e.what());
  }
  if (!(*claimed == peer_.dn)) {
    return fail(fault::kDnMismatch,
                "Init names " + claimed->str() + " but the channel authenticated " + peer_.dn.str());
  }

  fresh_.emplace(pki::generate_keypair(algorithm_));
  csr_.emplace(pki::create_proxy_csr(peer_.dn, *fresh_));
  state_ = SessionState::kAwaitSigned;
  return CsrReply{id_, csr_->to_pem()};
}

std::variant<DelegationSession::Completed, Fault> DelegationSession::on_signed_proxy(
    const SignedProxy& msg, const pki::TrustStore& trust, const pki::ProxyOptions& options,
    pki::Timestamp now) {
  if (auto f = check_live(now)) return *f;
  if (state_ != SessionState::kAwaitSigned) {
    return fail(fault::kBadState, "SignedProxy before Init");
  }

  std::optional<pki::Certificate> cert;
  try {
    cert = pki::Certificate::from_pem(msg.proxy_cert_pem);
  } catch (const pki::PkiError& e) {
    return fail(fault::kMalformed, e.what());
  }
  if (!(cert->public_key() == fresh_->public_key())) {
    return fail(fault::kKeyMismatch, "signed certificate is not over the session's public key");
  }
  if (!peer_.certificate) return fail(fault::kUnauthenticated, "peer presented no certificate");
  if (!(cert->issuer() == peer_.dn)) {
    return fail(fault::kValidationFailed, "proxy issuer is not the authenticated peer");
  }

  std::string bundle;
  try {
    bundle = pki::assemble_proxy_bundle(*cert, fresh_->private_key(), *peer_.certificate);
  } catch (const pki::PkiError& e) {
    return fail(fault::kValidationFailed, e.what());
  }
  auto report = pki::validate_proxy_chain(bundle, trust, now, options);
  if (!report.ok()) return fail(fault::kValidationFailed, report.summary());

  state_ = SessionState::kDone;
  Ack ack{id_, cert->fingerprint(), cert->not_after().time_since_epoch().count()};
  return Completed{std::move(ack), std::move(bundle)};
}

Fault DelegationSession::on_unexpected(const Message& msg) {
  if (state_ == SessionState::kDone || state_ == SessionState::kFailed) {
    return make_fault(fault::kBadState, "session " + id_ + " is " + std::string(to_string(state_)));
  }
  return fail(fault::kBadState, std::string(type_name(msg)) + " is not a client message");
}

// ---- DelegationService ----

struct DelegationService::Entry {
  explicit Entry(DelegationSession s) : session(std::move(s)) {}

  std::mutex mu;
  DelegationSession session;
};

DelegationService::DelegationService(ProxyStore& store, ServiceConfig config)
    : store_(store), config_(std::move(config)) {}

std::shared_ptr<DelegationService::Entry> DelegationService::find(const std::string& id) const {
  std::lock_guard lock(mu_);
  auto it = sessions_.find(id);
  return it == sessions_.end() ? nullptr : it->second;
}

namespace {

const std::string* session_id_of(const Message& msg) {
  if (auto* m = std::get_if<CsrReply>(&msg)) return &m->session_id;
  if (auto* m = std::get_if<SignedProxy>(&msg)) return &m->session_id;
  if (auto* m = std::get_if<Ack>(&msg)) return &m->session_id;
  return nullptr;
}

}  // namespace

Message DelegationService::handle(const PeerIdentity& peer, const Message& msg) {
  auto now = config_.clock();

  if (auto* init = std::get_if<Init>(&msg)) {
    if (!peer.certificate) return make_fault(fault::kUnauthenticated, "client certificate required");
    auto entry = std::make_shared<Entry>(DelegationSession(
        pki::random_token(16), peer, now + config_.session_deadline, config_.key_algorithm));
    auto reply = entry->session.on_init(*init, now);
    if (std::holds_alternative<CsrReply>(reply)) {
      std::lock_guard lock(mu_);
      sessions_.emplace(entry->session.id(), entry);
    }
    return reply;
  }

  const std::string* sid = session_id_of(msg);
  if (!sid) return make_fault(fault::kBadState, "unexpected " + std::string(type_name(msg)));
  auto entry = find(*sid);
  if (!entry) return make_fault(fault::kUnknownSession, "no session " + *sid);

  std::lock_guard session_lock(entry->mu);
  auto& session = entry->session;
  if (!(peer.dn == session.peer().dn)) {
    return make_fault(fault::kDnMismatch, "session belongs to a different peer");
  }

  auto* signed_proxy = std::get_if<SignedProxy>(&msg);
  if (!signed_proxy) return session.on_unexpected(msg);

  auto result = session.on_signed_proxy(*signed_proxy, store_.trust(), store_.options(), now);
  if (auto* f = std::get_if<Fault>(&result)) return *f;
  auto& done = std::get<DelegationSession::Completed>(result);
  try {
    store_.put(done.bundle, now);
  } catch (const std::exception& e) {
    return make_fault(fault::kValidationFailed, e.what());
  }
  return done.ack;
}

std::string DelegationService::handle_frame(const PeerIdentity& peer, std::string_view bytes) {
  Message reply;
  try {
    reply = handle(peer, decode(bytes));
  } catch (const WireError& e) {
    reply = make_fault(fault::kMalformed, e.what());
  } catch (const std::exception& e) {
    reply = make_fault(fault::kInternal, e.what());
  }
  return encode(reply);
}

std::size_t DelegationService::reap(pki::Timestamp now) {
  std::lock_guard lock(mu_);
  std::size_t removed = 0;
  for (auto it = sessions_.begin(); it != sessions_.end();) {
    std::lock_guard session_lock(it->second->mu);
    // Finished sessions linger until the deadline so replays get bad-state.
    if (now > it->second->session.deadline()) {
      it = sessions_.erase(it);
      ++removed;
    } else {
      ++it;
    }
  }
  return removed;
}

std::size_t DelegationService::session_count() const {
  std::lock_guard lock(mu_);
  return sessions_.size();
}

}  // namespace lgrid::delegation
