// Copyright 2026 The lgrid Authors
// SPDX-License-Identifier: Apache-2.0

#include "lgrid/delegation/myproxy.hpp"

#include <nlohmann/json.hpp>

#include "lgrid/pki/digest.hpp"

namespace lgrid::delegation {

using nlohmann::json;

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

std::string str(const json& j, const char* name) {
  auto it = j.find(name);
  if (it == j.end() || !it->is_string()) {
    throw WireError(std::string("missing string field '") + name + "'");
  }
  return it->get<std::string>();
}

std::int64_t num(const json& j, const char* name) {
  auto it = j.find(name);
  if (it == j.end() || !it->is_number_integer()) {
    throw WireError(std::string("missing integer field '") + name + "'");
  }
  return it->get<std::int64_t>();
}

std::string digest(const std::string& salt, const std::string& passphrase) {
  return pki::sha256_hex(salt + ":" + passphrase);
}

Fault fault_of(std::string_view code, std::string detail) { return make_fault(code, std::move(detail)); }

}  // namespace

std::string encode_repository(const RepositoryMessage& m) {
  json j = std::visit(
      overloaded{
          [](const PutRequest& v) {
            return json{{"type", "PutRequest"},
                        {"username", v.username},
                        {"passphrase", v.passphrase},
                        {"retention", v.retention_seconds}};
          },
          [](const GetRequest& v) {
            return json{{"type", "GetRequest"},
                        {"username", v.username},
                        {"passphrase", v.passphrase},
                        {"lifetime", v.lifetime_seconds}};
          },
          [](const GetGranted& v) {
            return json{{"type", "GetGranted"},
                        {"session_id", v.session_id},
                        {"issuer_dn", v.issuer_dn}};
          },
          [](const CsrSubmit& v) {
            return json{{"type", "CsrSubmit"}, {"session_id", v.session_id}, {"csr_pem", v.csr_pem}};
          },
          [](const ChainReply& v) {
            return json{{"type", "ChainReply"},
                        {"session_id", v.session_id},
                        {"chain_pem", v.chain_pem}};
          },
          [](const CsrReply& v) { return json::parse(to_json(v)); },
          [](const SignedProxy& v) { return json::parse(to_json(v)); },
          [](const Ack& v) { return json::parse(to_json(v)); },
          [](const Fault& v) { return json::parse(to_json(v)); },
      },
      m);
  return frame(j.dump());
}

RepositoryMessage decode_repository(std::string_view bytes) {
  auto text = unframe(bytes);
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw WireError("message is not a JSON object");
  auto type = str(j, "type");
  if (type == "PutRequest") return PutRequest{str(j, "username"), str(j, "passphrase"), num(j, "retention")};
  if (type == "GetRequest") return GetRequest{str(j, "username"), str(j, "passphrase"), num(j, "lifetime")};
  if (type == "GetGranted") return GetGranted{str(j, "session_id"), str(j, "issuer_dn")};
  if (type == "CsrSubmit") return CsrSubmit{str(j, "session_id"), str(j, "csr_pem")};
  if (type == "ChainReply") return ChainReply{str(j, "session_id"), str(j, "chain_pem")};

  auto shared = message_from_json(text);
  return std::visit(
      overloaded{
          [](const Init&) -> RepositoryMessage { throw WireError("Init is not a repository message"); },
          [](const auto& v) -> RepositoryMessage { return v; },
      },
      shared);
}

// ---- simulator ----

MyProxySimulator::MyProxySimulator(pki::TrustStore trust, SimulatorConfig config)
    : trust_(std::move(trust)), config_(std::move(config)) {}

std::size_t MyProxySimulator::credential_count() const {
  std::lock_guard lock(mu_);
  return credentials_.size();
}

RepositoryMessage MyProxySimulator::handle(const PeerIdentity& peer, const RepositoryMessage& msg) {
  auto now = config_.clock();
  std::lock_guard lock(mu_);
  return std::visit(
      overloaded{
          [&](const PutRequest& m) { return on_put(peer, m, now); },
          [&](const SignedProxy& m) { return on_signed(peer, m, now); },
          [&](const GetRequest& m) { return on_get(m, now); },
          [&](const CsrSubmit& m) { return on_csr(m, now); },
          [&](const auto&) -> RepositoryMessage {
            return fault_of(fault::kBadState, "not a client message");
          },
      },
      msg);
}

std::string MyProxySimulator::handle_frame(const PeerIdentity& peer, std::string_view bytes) {
  RepositoryMessage reply;
  try {
    reply = handle(peer, decode_repository(bytes));
  } catch (const WireError& e) {
    reply = fault_of(fault::kMalformed, e.what());
  } catch (const std::exception& e) {
    reply = fault_of(fault::kInternal, e.what());
  }
  return encode_repository(reply);
}

RepositoryMessage MyProxySimulator::on_put(const PeerIdentity& peer, const PutRequest& req,
                                           pki::Timestamp now) {
  if (!peer.certificate) return fault_of(fault::kUnauthenticated, "client certificate required");
  if (req.username.empty() || req.passphrase.empty()) {
    return fault_of(fault::kMalformed, "username and passphrase are required");
  }
  if (req.retention_seconds <= 0) return fault_of(fault::kMalformed, "retention must be positive");

  auto key = pki::generate_keypair();
  auto csr = pki::create_proxy_csr(peer.dn, key);
  auto id = pki::random_token(16);
  auto salt = pki::random_token(8);
  puts_.emplace(id, PutSession{peer, req.username, salt, digest(salt, req.passphrase),
                               std::move(key), now + config_.session_deadline});
  return CsrReply{id, csr.to_pem()};
}

RepositoryMessage MyProxySimulator::on_signed(const PeerIdentity& peer, const SignedProxy& msg,
                                              pki::Timestamp now) {
  auto it = puts_.find(msg.session_id);
  if (it == puts_.end()) return fault_of(fault::kUnknownSession, "no session " + msg.session_id);
  PutSession session = std::move(it->second);
  puts_.erase(it);

  if (!(peer.dn == session.peer.dn)) return fault_of(fault::kDnMismatch, "session belongs to another peer");
  if (now > session.deadline) return fault_of(fault::kSessionExpired, "put session expired");

  std::string bundle;
  try {
    auto cert = pki::Certificate::from_pem(msg.proxy_cert_pem);
    if (!(cert.public_key() == session.key.public_key())) {
      return fault_of(fault::kKeyMismatch, "certificate is not over the session key");
    }
    if (cert.not_after() > now + config_.max_retention + std::chrono::minutes(5)) {
      return fault_of(fault::kValidationFailed, "retention exceeds the repository maximum");
    }
    bundle = pki::assemble_proxy_bundle(cert, session.key.private_key(), *session.peer.certificate);
  } catch (const pki::PkiError& e) {
    return fault_of(fault::kValidationFailed, e.what());
  }
  auto parsed = pki::parse_proxy_bundle(bundle);
  auto report = pki::validate_proxy_chain(parsed, trust_, now, config_.proxy);
  if (!report.ok()) return fault_of(fault::kValidationFailed, report.summary());

  auto not_after = parsed.proxy_cert.not_after();
  credentials_.insert_or_assign(session.username,
                                Credential{session.salt, session.passphrase_digest, bundle, not_after});
  return Ack{msg.session_id, parsed.proxy_cert.fingerprint(), not_after.time_since_epoch().count()};
}

RepositoryMessage MyProxySimulator::on_get(const GetRequest& req, pki::Timestamp now) {
  auto it = credentials_.find(req.username);
  if (it == credentials_.end()) return fault_of(fault::kUnknownUser, "no credential for " + req.username);
  const auto& cred = it->second;
  if (digest(cred.salt, req.passphrase) != cred.passphrase_digest) {
    return fault_of(fault::kBadPassphrase, "passphrase does not match");
  }
  if (now >= cred.not_after) return fault_of(fault::kCredentialExpired, "stored credential expired");
  if (req.lifetime_seconds <= 0) return fault_of(fault::kMalformed, "lifetime must be positive");

  auto id = pki::random_token(16);
  gets_.emplace(id, GetSession{req.username, std::chrono::seconds(req.lifetime_seconds),
                               now + config_.session_deadline});
  auto stored = pki::parse_proxy_bundle(cred.bundle);
  return GetGranted{id, stored.proxy_cert.subject().str()};
}

RepositoryMessage MyProxySimulator::on_csr(const CsrSubmit& msg, pki::Timestamp now) {
  auto it = gets_.find(msg.session_id);
  if (it == gets_.end()) return fault_of(fault::kUnknownSession, "no session " + msg.session_id);
  GetSession session = std::move(it->second);
  gets_.erase(it);
  if (now > session.deadline) return fault_of(fault::kSessionExpired, "get session expired");

  auto cred = credentials_.find(session.username);
  if (cred == credentials_.end()) return fault_of(fault::kUnknownUser, "credential was removed");
  if (now >= cred->second.not_after) {
    return fault_of(fault::kCredentialExpired, "stored credential expired");
  }

  try {
    auto stored = pki::parse_proxy_bundle(cred->second.bundle);
    auto csr = pki::CertificateSigningRequest::from_pem(msg.csr_pem);
    auto cert = pki::sign_proxy_csr(stored.proxy_cert, stored.proxy_key, csr, session.lifetime, now,
                                    config_.proxy);
    std::string chain = cert.to_pem() + stored.proxy_cert.to_pem();
    for (const auto& c : stored.chain) chain += c.to_pem();
    return ChainReply{msg.session_id, std::move(chain)};
  } catch (const pki::PkiError& e) {
    return fault_of(fault::kValidationFailed, e.what());
  }
}

// ---- client ----

namespace {

template <class Expected>
Expected expect_reply(const std::string& bytes) {
  RepositoryMessage reply;
  try {
    reply = decode_repository(bytes);
  } catch (const WireError& e) {
    throw MyProxyError(std::string(fault::kMalformed), std::string("malformed reply: ") + e.what());
  }
  if (auto* f = std::get_if<Fault>(&reply)) {
    throw MyProxyError(f->code, "repository fault " + f->code + ": " + f->detail);
  }
  auto* m = std::get_if<Expected>(&reply);
  if (!m) throw MyProxyError(std::string(fault::kBadState), "unexpected reply");
  return std::move(*m);
}

}  // namespace

PutReceipt myproxy_put(Channel& channel, const std::string& username, const std::string& passphrase,
                       const pki::Certificate& user_cert, const pki::PrivateKey& user_key,
                       std::chrono::seconds retention, Transcript* transcript) {
  Transcript local;
  RecordingChannel rec(channel, transcript ? *transcript : local);

  auto reply = expect_reply<CsrReply>(
      rec.round_trip(encode_repository(PutRequest{username, passphrase, retention.count()})));
  auto csr = pki::CertificateSigningRequest::from_pem(reply.csr_pem);
  if (!csr.verify_proof_of_possession() || !csr.subject().extends_by_one_cn(user_cert.subject())) {
    throw MyProxyError(std::string(fault::kSubstitution), "repository CSR is not a proxy request for us");
  }
  auto cert = pki::sign_proxy_csr(user_cert, user_key, csr, retention, pki::now_seconds());
  auto ack = expect_reply<Ack>(rec.round_trip(encode_repository(SignedProxy{reply.session_id, cert.to_pem()})));
  rec.finish();
  if (ack.proxy_fingerprint != cert.fingerprint()) {
    throw MyProxyError(std::string(fault::kBadState), "Ack does not match the signed certificate");
  }
  return PutReceipt{username, cert.not_after(), ack.proxy_fingerprint};
}

std::string myproxy_get(Channel& channel, const std::string& username, const std::string& passphrase,
                        std::chrono::seconds lifetime, Transcript* transcript,
                        pki::KeyAlgorithm algorithm) {
  Transcript local;
  RecordingChannel rec(channel, transcript ? *transcript : local);

  auto granted = expect_reply<GetGranted>(
      rec.round_trip(encode_repository(GetRequest{username, passphrase, lifetime.count()})));
  auto key = pki::generate_keypair(algorithm);
  auto issuer = pki::parse_dn(granted.issuer_dn);
  auto csr = pki::create_proxy_csr(issuer, key);
  auto chain_reply = expect_reply<ChainReply>(
      rec.round_trip(encode_repository(CsrSubmit{granted.session_id, csr.to_pem()})));
  rec.finish();

  auto certs = pki::Certificate::all_from_pem(chain_reply.chain_pem);
  if (certs.size() < 2) throw MyProxyError(std::string(fault::kMalformed), "short chain");
  std::vector<pki::Certificate> chain(certs.begin() + 1, certs.end());
  return pki::assemble_proxy_bundle(certs.front(), key.private_key(), chain);
}

}  // namespace lgrid::delegation
