// Copyright 2026 The lgrid Authors
// SPDX-License-Identifier: Apache-2.0

#include "lgrid/pki/keys.hpp"

#include <openssl/ec.h>
#include <openssl/pem.h>
#include <openssl/rsa.h>

#include "ossl.hpp"

namespace lgrid::pki {

using detail::fail;

KeyAlgorithm parse_key_algorithm(std::string_view id) {
  if (id == "ec-p256") return KeyAlgorithm::kEcP256;
  if (id == "rsa-2048") return KeyAlgorithm::kRsa2048;
  throw UnsupportedAlgorithm(id);
}

std::string_view to_string(KeyAlgorithm alg) {
  switch (alg) {
    case KeyAlgorithm::kEcP256:
      return "ec-p256";
    case KeyAlgorithm::kRsa2048:
      return "rsa-2048";
  }
  return "?";
}

// ---- PublicKey ----

PublicKey::PublicKey(std::shared_ptr<EVP_PKEY> key) : key_(std::move(key)) {
  if (!key_) throw PkiError("null public key");
}

PublicKey PublicKey::from_pem(std::string_view pem) {
  auto bio = detail::mem_bio(pem);
  EVP_PKEY* k = PEM_read_bio_PUBKEY(bio.get(), nullptr, nullptr, nullptr);
  if (!k) fail("cannot parse public key PEM");
  return PublicKey(detail::share(k));
}

PublicKey PublicKey::from_der(std::string_view der) {
  auto* p = reinterpret_cast<const unsigned char*>(der.data());
  EVP_PKEY* k = d2i_PUBKEY(nullptr, &p, static_cast<long>(der.size()));
  if (!k) fail("cannot parse public key DER");
  return PublicKey(detail::share(k));
}

std::string PublicKey::to_pem() const {
  auto bio = detail::out_bio();
  if (PEM_write_bio_PUBKEY(bio.get(), key_.get()) != 1) fail("PEM_write_bio_PUBKEY");
  return detail::drain(bio.get());
}

std::string PublicKey::to_der() const {
  unsigned char* buf = nullptr;
  int len = i2d_PUBKEY(key_.get(), &buf);
  if (len <= 0) fail("i2d_PUBKEY");
  std::string out(reinterpret_cast<char*>(buf), static_cast<std::size_t>(len));
  OPENSSL_free(buf);
  return out;
}

bool PublicKey::verify(std::string_view message, std::string_view signature) const {
  detail::EvpMdCtxPtr ctx(EVP_MD_CTX_new());
  if (!ctx) fail("EVP_MD_CTX_new");
  if (EVP_DigestVerifyInit(ctx.get(), nullptr, EVP_sha256(), nullptr, key_.get()) != 1) {
    fail("EVP_DigestVerifyInit");
  }
  int rc = EVP_DigestVerify(ctx.get(), reinterpret_cast<const unsigned char*>(signature.data()),
                            signature.size(),
                            reinterpret_cast<const unsigned char*>(message.data()), message.size());
  ERR_clear_error();
  return rc == 1;
}

bool operator==(const PublicKey& a, const PublicKey& b) {
  return EVP_PKEY_eq(a.key_.get(), b.key_.get()) == 1;
}

// ---- PrivateKey ----

PrivateKey::PrivateKey(std::shared_ptr<EVP_PKEY> key) : key_(std::move(key)) {
  if (!key_) throw PkiError("null private key");
}

PrivateKey PrivateKey::from_pem(std::string_view pem, std::string_view passphrase) {
  auto bio = detail::mem_bio(pem);
  std::string pass(passphrase);
  EVP_PKEY* k = PEM_read_bio_PrivateKey(bio.get(), nullptr, nullptr,
                                        pass.empty() ? nullptr : pass.data());
  if (!k) fail("cannot parse private key PEM");
  return PrivateKey(detail::share(k));
}

std::string PrivateKey::sign(std::string_view message) const {
  detail::EvpMdCtxPtr ctx(EVP_MD_CTX_new());
  if (!ctx) fail("EVP_MD_CTX_new");
  if (EVP_DigestSignInit(ctx.get(), nullptr, EVP_sha256(), nullptr, key_.get()) != 1) {
    fail("EVP_DigestSignInit");
  }
  std::size_t len = 0;
  auto* msg = reinterpret_cast<const unsigned char*>(message.data());
  if (EVP_DigestSign(ctx.get(), nullptr, &len, msg, message.size()) != 1) fail("EVP_DigestSign");
  std::string sig(len, '\0');
  if (EVP_DigestSign(ctx.get(), reinterpret_cast<unsigned char*>(sig.data()), &len, msg,
                     message.size()) != 1) {
    fail("EVP_DigestSign");
  }
  sig.resize(len);
  return sig;
}

PublicKey PrivateKey::public_key() const {
  // Round trip through SubjectPublicKeyInfo so the result holds no private part.
  unsigned char* buf = nullptr;
  int len = i2d_PUBKEY(key_.get(), &buf);
  if (len <= 0) fail("i2d_PUBKEY");
  std::string der(reinterpret_cast<char*>(buf), static_cast<std::size_t>(len));
  OPENSSL_free(buf);
  return PublicKey::from_der(der);
}

KeyAlgorithm PrivateKey::algorithm() const {
  switch (EVP_PKEY_get_base_id(key_.get())) {
    case EVP_PKEY_EC:
      return KeyAlgorithm::kEcP256;
    case EVP_PKEY_RSA:
      return KeyAlgorithm::kRsa2048;
    default:
      throw UnsupportedAlgorithm(EVP_PKEY_get0_type_name(key_.get()));
  }
}

std::string PrivateKey::export_pem() const {
  auto bio = detail::out_bio();
  if (PEM_write_bio_PrivateKey(bio.get(), key_.get(), nullptr, nullptr, 0, nullptr, nullptr) !=
      1) {
    fail("PEM_write_bio_PrivateKey");
  }
  return detail::drain(bio.get());
}

std::string PrivateKey::export_der() const {
  auto bio = detail::out_bio();
  if (i2d_PKCS8PrivateKey_bio(bio.get(), key_.get(), nullptr, nullptr, 0, nullptr, nullptr) != 1) {
    fail("i2d_PKCS8PrivateKey_bio");
  }
  return detail::drain(bio.get());
}

// ---- KeyPair ----

KeyPair::KeyPair(PrivateKey key)
    : private_(std::move(key)), public_(private_.public_key()), algorithm_(private_.algorithm()) {}

KeyPair generate_keypair(KeyAlgorithm alg) {
  EVP_PKEY* raw = nullptr;
  switch (alg) {
    case KeyAlgorithm::kEcP256:
      raw = EVP_PKEY_Q_keygen(nullptr, nullptr, "EC", "P-256");
      break;
    case KeyAlgorithm::kRsa2048:
      raw = EVP_PKEY_Q_keygen(nullptr, nullptr, "RSA", static_cast<size_t>(2048));
      break;
  }
  if (!raw) fail("key generation failed");
  KeyPair kp{PrivateKey(detail::share(raw))};

  static constexpr std::string_view kProbe = "lgrid key self-test";
  if (!kp.public_key().verify(kProbe, kp.private_key().sign(kProbe))) {
    throw PkiError("generated key failed sign/verify self-test");
  }
  return kp;
}

KeyPair generate_keypair(std::string_view algorithm_id) {
  return generate_keypair(parse_key_algorithm(algorithm_id));
}

}  // namespace lgrid::pki
