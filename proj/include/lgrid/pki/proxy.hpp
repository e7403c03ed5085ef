// Copyright 2026 The lgrid Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lgrid/pki/certificate.hpp"

namespace lgrid::pki {

struct ProxyOptions {
  /// Omit the proxyCertInfo extension when signing, and do not require it
  /// when validating.
  bool legacy_proxy = false;
};

/// CSR whose subject is `user_dn` plus one CN holding a fresh 31-bit decimal serial.
CertificateSigningRequest create_proxy_csr(const DistinguishedName& user_dn, const KeyPair& fresh);

/// Signs a proxy CSR with the delegator's own credential.
///
/// The proxy is valid from `now` until min(now + lifetime, issuer.not_after).
/// Throws PkiError if the CSR subject is not the issuer subject plus one CN,
/// the CSR proof of possession is bad, the issuer is expired, or lifetime <= 0.
Certificate sign_proxy_csr(const Certificate& issuer_cert, const PrivateKey& issuer_key,
                           const CertificateSigningRequest& csr, std::chrono::seconds lifetime,
                           Timestamp now = now_seconds(), const ProxyOptions& options = {});

/// A parsed proxy file: leaf proxy, its key, then every certificate up to and
/// including the end-entity user certificate.
struct ProxyBundle {
  Certificate proxy_cert;
  PrivateKey proxy_key;
  std::vector<Certificate> chain;

  const Certificate& user_certificate() const { return chain.back(); }
  /// Subject of the end-entity certificate, i.e. the owning user.
  DistinguishedName user_dn() const { return user_certificate().subject(); }
};

/// Proxy-file bytes: proxy cert PEM, proxy key PEM, then the chain PEMs.
/// Throws PkiError if the parts are inconsistent.
std::string assemble_proxy_bundle(const Certificate& proxy_cert, const PrivateKey& proxy_key,
                                  std::span<const Certificate> chain);
std::string assemble_proxy_bundle(const Certificate& proxy_cert, const PrivateKey& proxy_key,
                                  const Certificate& user_cert);

/// Throws PkiError if the text is not a proxy file.
ProxyBundle parse_proxy_bundle(std::string_view pem);

class TrustStore {
 public:
  TrustStore() = default;
  explicit TrustStore(std::vector<Certificate> anchors);

  /// Throws PkiError unless `anchor` is self-signed or `explicitly_trusted`.
  void add(Certificate anchor, bool explicitly_trusted = false);
  const std::vector<Certificate>& anchors() const noexcept { return anchors_; }

  static TrustStore from_pem(std::string_view pem);

 private:
  std::vector<Certificate> anchors_;
};

enum class Violation {
  kProxyKeyMismatch,
  kIssuerMismatch,
  kSubjectExtensionRule,
  kProxySignatureInvalid,
  kProxyNotYetValid,
  kProxyExpired,
  kValidityNotContained,
  kMissingProxyCertInfo,
  kUserCertificateExpired,
  kUntrustedUserCertificate,
};

std::string_view to_string(Violation v);

struct ValidationReport {
  std::vector<Violation> violations;

  bool ok() const noexcept { return violations.empty(); }
  bool has(Violation v) const;
  std::string summary() const;
};

ValidationReport validate_proxy_chain(const ProxyBundle& bundle, const TrustStore& trust,
                                      Timestamp at, const ProxyOptions& options = {});
/// Throws PkiError if `bundle_pem` does not parse.
ValidationReport validate_proxy_chain(std::string_view bundle_pem, const TrustStore& trust,
                                      Timestamp at, const ProxyOptions& options = {});

}  // namespace lgrid::pki
