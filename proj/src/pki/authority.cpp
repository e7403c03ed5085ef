// Copyright 2026 The lgrid Authors
// SPDX-License-Identifier: Apache-2.0

#include "lgrid/pki/authority.hpp"

#include "lgrid/pki/digest.hpp"

namespace lgrid::pki {

namespace {

std::uint64_t random_serial() {
  auto raw = random_bytes(8);
  std::uint64_t v = 0;
  for (unsigned char c : raw) v = (v << 8) | c;
  return (v & 0x7fffffffffffffffull) | 1u;
}

}  // namespace

DevAuthority DevAuthority::create(const DistinguishedName& name, std::chrono::seconds validity,
                                  KeyAlgorithm alg) {
  auto kp = generate_keypair(alg);
  auto now = now_seconds();
  CertificateTemplate tmpl{
      .subject = name,
      .issuer = name,
      .serial = random_serial(),
      .not_before = now - std::chrono::hours(1),
      .not_after = now + validity,
      .is_ca = true,
  };
  auto cert = issue_certificate(tmpl, kp.public_key(), kp.private_key());
  return DevAuthority(Identity{std::move(cert), kp.private_key()});
}

Identity DevAuthority::issue_user(const DistinguishedName& subject, Timestamp not_before,
                                  Timestamp not_after, KeyAlgorithm alg) const {
  auto kp = generate_keypair(alg);
  CertificateTemplate tmpl{
      .subject = subject,
      .issuer = ca_.cert.subject(),
      .serial = random_serial(),
      .not_before = not_before,
      .not_after = not_after,
  };
  return {issue_certificate(tmpl, kp.public_key(), ca_.key), kp.private_key()};
}

Identity DevAuthority::issue_user(const DistinguishedName& subject,
                                  std::chrono::seconds validity) const {
  auto now = now_seconds();
  return issue_user(subject, now - std::chrono::minutes(5), now + validity);
}

Identity DevAuthority::issue_host(const DistinguishedName& subject,
                                  const std::vector<std::string>& dns_names,
                                  const std::vector<std::string>& ip_addresses,
                                  std::chrono::seconds validity) const {
  auto kp = generate_keypair();
  auto now = now_seconds();
  CertificateTemplate tmpl{
      .subject = subject,
      .issuer = ca_.cert.subject(),
      .serial = random_serial(),
      .not_before = now - std::chrono::minutes(5),
      .not_after = now + validity,
      .dns_names = dns_names,
      .ip_addresses = ip_addresses,
  };
  return {issue_certificate(tmpl, kp.public_key(), ca_.key), kp.private_key()};
}

}  // namespace lgrid::pki
