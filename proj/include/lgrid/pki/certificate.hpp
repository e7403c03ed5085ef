// Copyright 2026 The lgrid Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lgrid/pki/dn.hpp"
#include "lgrid/pki/keys.hpp"

typedef struct x509_st X509;
typedef struct X509_req_st X509_REQ;

namespace lgrid::pki {

using Clock = std::chrono::system_clock;
using Timestamp = std::chrono::time_point<Clock, std::chrono::seconds>;

inline Timestamp now_seconds() {
  return std::chrono::time_point_cast<std::chrono::seconds>(Clock::now());
}

inline constexpr std::string_view kProxyCertInfoOid = "1.3.6.1.5.5.7.1.14";

struct Extension {
  std::string oid;
  bool critical = false;
  std::string value;  // DER of the extension value
};

/// Immutable X.509 v3 certificate.
class Certificate {
 public:
  static Certificate from_pem(std::string_view pem);
  static Certificate from_der(std::string_view der);
  /// All certificates in a PEM text, in order.
  static std::vector<Certificate> all_from_pem(std::string_view pem);

  DistinguishedName subject() const;
  DistinguishedName issuer() const;
  std::uint64_t serial() const;
  Timestamp not_before() const;
  Timestamp not_after() const;
  PublicKey public_key() const;
  std::vector<Extension> extensions() const;
  std::optional<Extension> find_extension(std::string_view oid) const;

  std::string to_pem() const;
  std::string to_der() const;
  /// SHA-256 over the DER encoding, hex.
  std::string fingerprint() const;

  bool verify_signed_by(const PublicKey& issuer_key) const;
  bool is_self_signed() const;

  X509* native() const noexcept { return cert_.get(); }

  friend bool operator==(const Certificate& a, const Certificate& b);

  explicit Certificate(std::shared_ptr<X509> cert);

 private:
  std::shared_ptr<X509> cert_;
};

class CertificateSigningRequest {
 public:
  static CertificateSigningRequest from_pem(std::string_view pem);

  DistinguishedName subject() const;
  PublicKey public_key() const;
  bool verify_proof_of_possession() const;
  std::string to_pem() const;

  X509_REQ* native() const noexcept { return req_.get(); }

  explicit CertificateSigningRequest(std::shared_ptr<X509_REQ> req);

 private:
  std::shared_ptr<X509_REQ> req_;
};

/// Builds a CSR for `subject` over `key` and signs it with the same key.
CertificateSigningRequest make_csr(const DistinguishedName& subject, const KeyPair& key);

/// Low-level issuance. Callers enforce any policy; this only encodes and signs.
struct CertificateTemplate {
  DistinguishedName subject;
  DistinguishedName issuer;
  std::uint64_t serial = 1;
  Timestamp not_before;
  Timestamp not_after;
  bool is_ca = false;
  bool proxy_cert_info = false;
  std::vector<std::string> dns_names;
  std::vector<std::string> ip_addresses;
};

Certificate issue_certificate(const CertificateTemplate& tmpl, const PublicKey& subject_key,
                              const PrivateKey& issuer_key);

}  // namespace lgrid::pki
