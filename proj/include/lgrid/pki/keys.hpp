// Copyright 2026 The lgrid Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>

typedef struct evp_pkey_st EVP_PKEY;

namespace lgrid::pki {

class PkiError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UnsupportedAlgorithm : public PkiError {
 public:
  explicit UnsupportedAlgorithm(std::string_view id)
      : PkiError("unsupported key algorithm '" + std::string(id) + "'") {}
};

enum class KeyAlgorithm { kEcP256, kRsa2048 };

inline constexpr KeyAlgorithm kDefaultKeyAlgorithm = KeyAlgorithm::kEcP256;

/// "ec-p256" or "rsa-2048".
KeyAlgorithm parse_key_algorithm(std::string_view id);
std::string_view to_string(KeyAlgorithm alg);

/// Public half of an asymmetric key. Never carries private material.
class PublicKey {
 public:
  static PublicKey from_pem(std::string_view pem);
  static PublicKey from_der(std::string_view der);

  std::string to_pem() const;
  std::string to_der() const;

  bool verify(std::string_view message, std::string_view signature) const;

  EVP_PKEY* native() const noexcept { return key_.get(); }

  friend bool operator==(const PublicKey& a, const PublicKey& b);

  explicit PublicKey(std::shared_ptr<EVP_PKEY> key);

 private:
  std::shared_ptr<EVP_PKEY> key_;
};

class PrivateKey {
 public:
  /// `passphrase` is only consulted for encrypted PEM.
  static PrivateKey from_pem(std::string_view pem, std::string_view passphrase = {});

  std::string sign(std::string_view message) const;
  PublicKey public_key() const;
  KeyAlgorithm algorithm() const;

  // The two export functions are the only way private material leaves this
  // object. Unencrypted PKCS#8.
  std::string export_pem() const;
  std::string export_der() const;

  EVP_PKEY* native() const noexcept { return key_.get(); }

  explicit PrivateKey(std::shared_ptr<EVP_PKEY> key);

 private:
  std::shared_ptr<EVP_PKEY> key_;
};

class KeyPair {
 public:
  explicit KeyPair(PrivateKey key);

  const PublicKey& public_key() const noexcept { return public_; }
  const PrivateKey& private_key() const noexcept { return private_; }
  KeyAlgorithm algorithm() const noexcept { return algorithm_; }

 private:
  PrivateKey private_;
  PublicKey public_;
  KeyAlgorithm algorithm_;
};

/// Fresh key pair; the result has passed a sign/verify self-test.
KeyPair generate_keypair(KeyAlgorithm alg = kDefaultKeyAlgorithm);
KeyPair generate_keypair(std::string_view algorithm_id);

}  // namespace lgrid::pki
