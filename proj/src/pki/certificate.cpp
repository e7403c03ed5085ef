// Copyright 2026 The lgrid Authors
// SPDX-License-Identifier: Apache-2.0

#include "lgrid/pki/certificate.hpp"

#include <openssl/pem.h>
#include <openssl/x509v3.h>

#include <ctime>

#include "lgrid/pki/digest.hpp"
#include "ossl.hpp"

namespace lgrid::pki {

using detail::fail;

namespace {

detail::X509NamePtr to_x509_name(const DistinguishedName& dn) {
  detail::X509NamePtr name(X509_NAME_new());
  if (!name) fail("X509_NAME_new");
  for (const auto& rdn : dn.rdns()) {
    if (X509_NAME_add_entry_by_txt(name.get(), rdn.type.c_str(), MBSTRING_UTF8,
                                   reinterpret_cast<const unsigned char*>(rdn.value.data()),
                                   static_cast<int>(rdn.value.size()), -1, 0) != 1) {
      fail("cannot encode RDN " + rdn.type);
    }
  }
  return name;
}

DistinguishedName from_x509_name(const X509_NAME* name) {
  std::vector<Rdn> rdns;
  int n = X509_NAME_entry_count(name);
  for (int i = 0; i < n; ++i) {
    const X509_NAME_ENTRY* entry = X509_NAME_get_entry(name, i);
    int nid = OBJ_obj2nid(X509_NAME_ENTRY_get_object(entry));
    const char* sn = nid == NID_undef ? nullptr : OBJ_nid2sn(nid);
    if (!sn) throw PkiError("certificate name has an unrecognized attribute");
    unsigned char* utf8 = nullptr;
    int len = ASN1_STRING_to_UTF8(&utf8, X509_NAME_ENTRY_get_data(entry));
    if (len < 0) fail("ASN1_STRING_to_UTF8");
    rdns.push_back({sn, std::string(reinterpret_cast<char*>(utf8), static_cast<std::size_t>(len))});
    OPENSSL_free(utf8);
  }
  return DistinguishedName(std::move(rdns));
}

Timestamp from_asn1_time(const ASN1_TIME* t) {
  std::tm tm{};
  if (ASN1_TIME_to_tm(t, &tm) != 1) fail("ASN1_TIME_to_tm");
  return Timestamp(std::chrono::seconds(timegm(&tm)));
}

void set_time(ASN1_TIME* field, Timestamp t) {
  if (!ASN1_TIME_set(field, static_cast<time_t>(t.time_since_epoch().count()))) {
    fail("ASN1_TIME_set");
  }
}

void add_ext(X509* cert, X509V3_CTX* ctx, int nid, const std::string& value) {
  X509_EXTENSION* ext = X509V3_EXT_conf_nid(nullptr, ctx, nid, value.c_str());
  if (!ext) fail("cannot build extension " + std::string(OBJ_nid2sn(nid)) + "=" + value);
  int rc = X509_add_ext(cert, ext, -1);
  X509_EXTENSION_free(ext);
  if (rc != 1) fail("X509_add_ext");
}

// ProxyCertInfo ::= SEQUENCE { proxyPolicy SEQUENCE { policyLanguage id-ppl-inheritAll } }
void add_proxy_cert_info(X509* cert) {
  static constexpr unsigned char kInheritAll[] = {0x30, 0x0c, 0x30, 0x0a, 0x06, 0x08, 0x2b,
                                                  0x06, 0x01, 0x05, 0x05, 0x07, 0x15, 0x01};
  ASN1_OCTET_STRING* data = ASN1_OCTET_STRING_new();
  if (!data || ASN1_OCTET_STRING_set(data, kInheritAll, sizeof kInheritAll) != 1) {
    ASN1_OCTET_STRING_free(data);
    fail("ASN1_OCTET_STRING_set");
  }
  X509_EXTENSION* ext = X509_EXTENSION_create_by_NID(nullptr, NID_proxyCertInfo, 1, data);
  ASN1_OCTET_STRING_free(data);
  if (!ext) fail("cannot build proxyCertInfo");
  int rc = X509_add_ext(cert, ext, -1);
  X509_EXTENSION_free(ext);
  if (rc != 1) fail("X509_add_ext");
}

}  // namespace

// ---- Certificate ----

Certificate::Certificate(std::shared_ptr<X509> cert) : cert_(std::move(cert)) {
  if (!cert_) throw PkiError("null certificate");
}

Certificate Certificate::from_pem(std::string_view pem) {
  auto bio = detail::mem_bio(pem);
  X509* x = PEM_read_bio_X509(bio.get(), nullptr, nullptr, nullptr);
  if (!x) fail("cannot parse certificate PEM");
  return Certificate(detail::share(x));
}

Certificate Certificate::from_der(std::string_view der) {
  auto* p = reinterpret_cast<const unsigned char*>(der.data());
  X509* x = d2i_X509(nullptr, &p, static_cast<long>(der.size()));
  if (!x) fail("cannot parse certificate DER");
  return Certificate(detail::share(x));
}

std::vector<Certificate> Certificate::all_from_pem(std::string_view pem) {
  std::vector<Certificate> out;
  auto bio = detail::mem_bio(pem);
  while (X509* x = PEM_read_bio_X509(bio.get(), nullptr, nullptr, nullptr)) {
    out.emplace_back(detail::share(x));
  }
  ERR_clear_error();
  return out;
}

DistinguishedName Certificate::subject() const {
  return from_x509_name(X509_get_subject_name(cert_.get()));
}

DistinguishedName Certificate::issuer() const {
  return from_x509_name(X509_get_issuer_name(cert_.get()));
}

std::uint64_t Certificate::serial() const {
  std::uint64_t v = 0;
  if (ASN1_INTEGER_get_uint64(&v, X509_get0_serialNumber(cert_.get())) != 1) {
    fail("serial number out of range");
  }
  return v;
}

Timestamp Certificate::not_before() const { return from_asn1_time(X509_get0_notBefore(cert_.get())); }
Timestamp Certificate::not_after() const { return from_asn1_time(X509_get0_notAfter(cert_.get())); }

PublicKey Certificate::public_key() const {
  EVP_PKEY* k = X509_get_pubkey(cert_.get());
  if (!k) fail("certificate has no usable public key");
  return PublicKey(detail::share(k));
}

std::vector<Extension> Certificate::extensions() const {
  std::vector<Extension> out;
  int n = X509_get_ext_count(cert_.get());
  for (int i = 0; i < n; ++i) {
    X509_EXTENSION* ext = X509_get_ext(cert_.get(), i);
    char oid[128];
    OBJ_obj2txt(oid, sizeof oid, X509_EXTENSION_get_object(ext), 1);
    const ASN1_OCTET_STRING* data = X509_EXTENSION_get_data(ext);
    out.push_back({oid, X509_EXTENSION_get_critical(ext) == 1,
                   std::string(reinterpret_cast<const char*>(ASN1_STRING_get0_data(data)),
                               static_cast<std::size_t>(ASN1_STRING_length(data)))});
  }
  return out;
}

std::optional<Extension> Certificate::find_extension(std::string_view oid) const {
  for (auto& ext : extensions()) {
    if (ext.oid == oid) return ext;
  }
  return std::nullopt;
}

std::string Certificate::to_pem() const {
  auto bio = detail::out_bio();
  if (PEM_write_bio_X509(bio.get(), cert_.get()) != 1) fail("PEM_write_bio_X509");
  return detail::drain(bio.get());
}

std::string Certificate::to_der() const {
  unsigned char* buf = nullptr;
  int len = i2d_X509(cert_.get(), &buf);
  if (len <= 0) fail("i2d_X509");
  std::string out(reinterpret_cast<char*>(buf), static_cast<std::size_t>(len));
  OPENSSL_free(buf);
  return out;
}

std::string Certificate::fingerprint() const { return sha256_hex(to_der()); }

bool Certificate::verify_signed_by(const PublicKey& issuer_key) const {
  int rc = X509_verify(cert_.get(), issuer_key.native());
  ERR_clear_error();
  return rc == 1;
}

bool Certificate::is_self_signed() const {
  int rc = X509_self_signed(cert_.get(), 1);
  ERR_clear_error();
  return rc == 1;
}

bool operator==(const Certificate& a, const Certificate& b) {
  return X509_cmp(a.cert_.get(), b.cert_.get()) == 0;
}

// ---- CertificateSigningRequest ----

CertificateSigningRequest::CertificateSigningRequest(std::shared_ptr<X509_REQ> req)
    : req_(std::move(req)) {
  if (!req_) throw PkiError("null CSR");
}

CertificateSigningRequest CertificateSigningRequest::from_pem(std::string_view pem) {
  auto bio = detail::mem_bio(pem);
  X509_REQ* r = PEM_read_bio_X509_REQ(bio.get(), nullptr, nullptr, nullptr);
  if (!r) fail("cannot parse CSR PEM");
  return CertificateSigningRequest(detail::share(r));
}

DistinguishedName CertificateSigningRequest::subject() const {
  return from_x509_name(X509_REQ_get_subject_name(req_.get()));
}

PublicKey CertificateSigningRequest::public_key() const {
  EVP_PKEY* k = X509_REQ_get_pubkey(req_.get());
  if (!k) fail("CSR has no usable public key");
  return PublicKey(detail::share(k));
}

bool CertificateSigningRequest::verify_proof_of_possession() const {
  EVP_PKEY* k = X509_REQ_get0_pubkey(req_.get());
  if (!k) return false;
  int rc = X509_REQ_verify(req_.get(), k);
  ERR_clear_error();
  return rc == 1;
}

std::string CertificateSigningRequest::to_pem() const {
  auto bio = detail::out_bio();
  if (PEM_write_bio_X509_REQ(bio.get(), req_.get()) != 1) fail("PEM_write_bio_X509_REQ");
  return detail::drain(bio.get());
}

CertificateSigningRequest make_csr(const DistinguishedName& subject, const KeyPair& key) {
  auto req = detail::share(X509_REQ_new());
  if (!req) fail("X509_REQ_new");
  auto name = to_x509_name(subject);
  if (X509_REQ_set_version(req.get(), 0) != 1 ||
      X509_REQ_set_subject_name(req.get(), name.get()) != 1 ||
      X509_REQ_set_pubkey(req.get(), key.public_key().native()) != 1) {
    fail("cannot populate CSR");
  }
  if (X509_REQ_sign(req.get(), key.private_key().native(), EVP_sha256()) <= 0) {
    fail("X509_REQ_sign");
  }
  return CertificateSigningRequest(std::move(req));
}

Certificate issue_certificate(const CertificateTemplate& tmpl, const PublicKey& subject_key,
                              const PrivateKey& issuer_key) {
  if (tmpl.not_before >= tmpl.not_after) throw PkiError("empty validity window");

  auto cert = detail::share(X509_new());
  if (!cert) fail("X509_new");
  X509* x = cert.get();

  if (X509_set_version(x, 2) != 1) fail("X509_set_version");
  if (ASN1_INTEGER_set_uint64(X509_get_serialNumber(x), tmpl.serial) != 1) fail("serial");
  auto subject = to_x509_name(tmpl.subject);
  auto issuer = to_x509_name(tmpl.issuer);
  if (X509_set_subject_name(x, subject.get()) != 1 || X509_set_issuer_name(x, issuer.get()) != 1) {
    fail("cannot set certificate names");
  }
  set_time(X509_getm_notBefore(x), tmpl.not_before);
  set_time(X509_getm_notAfter(x), tmpl.not_after);
  if (X509_set_pubkey(x, subject_key.native()) != 1) fail("X509_set_pubkey");

  X509V3_CTX ctx;
  X509V3_set_ctx_nodb(&ctx);
  X509V3_set_ctx(&ctx, tmpl.is_ca ? x : nullptr, x, nullptr, nullptr, 0);

  if (tmpl.is_ca) {
    add_ext(x, &ctx, NID_basic_constraints, "critical,CA:TRUE");
    add_ext(x, &ctx, NID_key_usage, "critical,keyCertSign,cRLSign,digitalSignature");
    add_ext(x, &ctx, NID_subject_key_identifier, "hash");
  } else if (tmpl.proxy_cert_info) {
    add_ext(x, &ctx, NID_key_usage, "critical,digitalSignature,keyEncipherment");
    add_proxy_cert_info(x);
  } else {
    add_ext(x, &ctx, NID_basic_constraints, "critical,CA:FALSE");
    add_ext(x, &ctx, NID_key_usage, "critical,digitalSignature,keyEncipherment");
  }

  std::string san;
  for (const auto& d : tmpl.dns_names) san += (san.empty() ? "" : ",") + ("DNS:" + d);
  for (const auto& ip : tmpl.ip_addresses) san += (san.empty() ? "" : ",") + ("IP:" + ip);
  if (!san.empty()) add_ext(x, &ctx, NID_subject_alt_name, san);

  if (X509_sign(x, issuer_key.native(), EVP_sha256()) <= 0) fail("X509_sign");
  return Certificate(std::move(cert));
}

}  // namespace lgrid::pki
