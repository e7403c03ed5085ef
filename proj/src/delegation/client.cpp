// Copyright 2026 The lgrid Authors
// SPDX-License-Identifier: Apache-2.0

#include "lgrid/delegation/client.hpp"

#include "lgrid/pki/proxy.hpp"

namespace lgrid::delegation {

namespace {

using Kind = DelegationError::Kind;

[[noreturn]] void raise_fault(const Fault& f) {
  auto kind = f.code == fault::kSessionExpired ? Kind::kTimeout : Kind::kServerFault;
  throw DelegationError(kind, "server fault " + f.code + ": " + f.detail, f.code);
}

template <class Expected>
Expected expect(const std::string& reply_bytes) {
  Message reply;
  try {
    reply = decode(reply_bytes);
  } catch (const WireError& e) {
    throw DelegationError(Kind::kProtocol, std::string("malformed reply: ") + e.what());
  }
  if (auto* f = std::get_if<Fault>(&reply)) raise_fault(*f);
  auto* m = std::get_if<Expected>(&reply);
  if (!m) throw DelegationError(Kind::kProtocol, "unexpected " + std::string(type_name(reply)));
  return std::move(*m);
}

}  // namespace

DelegationResult client_delegate(Channel& channel, const pki::Certificate& user_cert,
                                 const pki::PrivateKey& user_key, std::chrono::seconds lifetime,
                                 const ClientOptions& options) {
  if (options.expected_server && !(channel.peer().dn == *options.expected_server)) {
    throw DelegationError(Kind::kChannelIdentity, "channel peer is " + channel.peer().dn.str() +
                                                      ", expected " +
                                                      options.expected_server->str());
  }

  DelegationResult result;
  RecordingChannel rec(channel, result.transcript);
  auto own_dn = user_cert.subject();

  auto csr_reply = expect<CsrReply>(rec.round_trip(encode(Init{own_dn.str()})));

  std::optional<pki::CertificateSigningRequest> csr;
  try {
    csr = pki::CertificateSigningRequest::from_pem(csr_reply.csr_pem);
  } catch (const pki::PkiError& e) {
    throw DelegationError(Kind::kProtocol, std::string("bad CSR: ") + e.what());
  }
  if (!csr->verify_proof_of_possession()) {
    throw DelegationError(Kind::kProtocol, "CSR proof of possession does not verify");
  }
  auto requested = csr->subject();
  if (!requested.extends_by_one_cn(own_dn)) {
    throw DelegationError(Kind::kSubstitution, "server asked to sign " + requested.str() +
                                                   ", which is not a proxy of " + own_dn.str());
  }

  pki::Certificate proxy = [&] {
    try {
      return pki::sign_proxy_csr(user_cert, user_key, *csr, lifetime, pki::now_seconds(),
                                 options.proxy);
    } catch (const pki::PkiError& e) {
      throw DelegationError(Kind::kSubstitution, e.what());
    }
  }();

  auto ack =
      expect<Ack>(rec.round_trip(encode(SignedProxy{csr_reply.session_id, proxy.to_pem()})));
  rec.finish();

  if (ack.session_id != csr_reply.session_id || ack.proxy_fingerprint != proxy.fingerprint()) {
    throw DelegationError(Kind::kProtocol, "Ack does not match the certificate we signed");
  }
  result.ack = std::move(ack);
  return result;
}

}  // namespace lgrid::delegation
