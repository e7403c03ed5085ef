// Copyright 2026 The lgrid Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "lgrid/pki/certificate.hpp"

namespace lgrid::pki {

class CredentialError : public PkiError {
 public:
  enum class Kind { kWrongPassphrase, kMissingKey, kMissingCertificate, kKeyMismatch, kMalformed };

  CredentialError(Kind kind, const std::string& what) : PkiError(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

struct PemCredential {
  std::string cert_pem;
  std::string key_pem;
};

/// Unpacks a PKCS#12 container into a PEM certificate and key.
PemCredential convert_credential_container(std::string_view p12, std::string_view passphrase);

/// Writes usercert.pem (0644) and userkey.pem (0600) into `dir`.
/// Both files are written in full or not at all.
void write_pem_credential(const PemCredential& cred, const std::filesystem::path& dir);

/// The user certificate/key pair as loaded from PEM files.
struct UserCredential {
  Certificate cert;
  PrivateKey key;
};

UserCredential load_user_credential(const std::filesystem::path& cert_path,
                                    const std::filesystem::path& key_path);

/// PKCS#12 packing, for test identities and the dev-certs tool.
std::string make_pkcs12(const Certificate& cert, const PrivateKey* key, std::string_view passphrase);

}  // namespace lgrid::pki
