// Copyright 2026 The lgrid Authors
// SPDX-License-Identifier: Apache-2.0

#include "lgrid/pki/credential.hpp"

#include <fcntl.h>
#include <openssl/pem.h>
#include <openssl/pkcs12.h>
#include <sys/stat.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>
#include <sstream>

#include "ossl.hpp"

namespace lgrid::pki {

namespace {

using Kind = CredentialError::Kind;

struct Pkcs12Parts {
  EVP_PKEY* key = nullptr;
  X509* cert = nullptr;
  STACK_OF(X509)* extra = nullptr;

  ~Pkcs12Parts() {
    EVP_PKEY_free(key);
    X509_free(cert);
    sk_X509_pop_free(extra, X509_free);
  }
};

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw PkiError("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_private_file(const std::filesystem::path& p, std::string_view data, mode_t mode) {
  int fd = ::open(p.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, mode);
  if (fd < 0) throw PkiError("cannot create " + p.string() + ": " + std::strerror(errno));
  // umask may have widened nothing but O_CREAT on an existing file keeps its mode.
  ::fchmod(fd, mode);
  std::size_t off = 0;
  while (off < data.size()) {
    ssize_t n = ::write(fd, data.data() + off, data.size() - off);
    if (n < 0) {
      if (errno == EINTR) continue;
      ::close(fd);
      throw PkiError("write failed on " + p.string());
    }
    off += static_cast<std::size_t>(n);
  }
  if (::fsync(fd) != 0 || ::close(fd) != 0) throw PkiError("cannot flush " + p.string());
}

}  // namespace

PemCredential convert_credential_container(std::string_view p12_bytes, std::string_view passphrase) {
  auto bio = detail::mem_bio(p12_bytes);
  std::unique_ptr<PKCS12, detail::Deleter<PKCS12, PKCS12_free>> p12(
      d2i_PKCS12_bio(bio.get(), nullptr));
  if (!p12) {
    ERR_clear_error();
    throw CredentialError(Kind::kMalformed, "not a PKCS#12 container");
  }

  std::string pass(passphrase);
  if (PKCS12_mac_present(p12.get()) &&
      PKCS12_verify_mac(p12.get(), pass.c_str(), static_cast<int>(pass.size())) != 1) {
    ERR_clear_error();
    throw CredentialError(Kind::kWrongPassphrase, "wrong passphrase for PKCS#12 container");
  }

  Pkcs12Parts parts;
  if (PKCS12_parse(p12.get(), pass.c_str(), &parts.key, &parts.cert, &parts.extra) != 1) {
    ERR_clear_error();
    throw CredentialError(Kind::kWrongPassphrase, "cannot decrypt PKCS#12 container");
  }
  if (!parts.key) throw CredentialError(Kind::kMissingKey, "PKCS#12 container holds no private key");
  if (!parts.cert && parts.extra && sk_X509_num(parts.extra) == 1) {
    // The key's localKeyID matched no certificate; pick up the lone one so the
    // mismatch is reported as such.
    parts.cert = sk_X509_shift(parts.extra);
  }
  if (!parts.cert) {
    throw CredentialError(Kind::kMissingCertificate, "PKCS#12 container holds no certificate");
  }
  if (X509_check_private_key(parts.cert, parts.key) != 1) {
    ERR_clear_error();
    throw CredentialError(Kind::kKeyMismatch, "certificate and private key do not match");
  }

  X509_up_ref(parts.cert);
  EVP_PKEY_up_ref(parts.key);
  Certificate cert(detail::share(parts.cert));
  PrivateKey key(detail::share(parts.key));
  return {cert.to_pem(), key.export_pem()};
}

void write_pem_credential(const PemCredential& cred, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto cert_path = dir / "usercert.pem";
  auto key_path = dir / "userkey.pem";
  auto cert_tmp = dir / ".usercert.pem.tmp";
  auto key_tmp = dir / ".userkey.pem.tmp";
  try {
    write_private_file(key_tmp, cred.key_pem, 0600);
    write_private_file(cert_tmp, cred.cert_pem, 0644);
    std::filesystem::rename(key_tmp, key_path);
    std::filesystem::rename(cert_tmp, cert_path);
  } catch (...) {
    std::error_code ec;
    std::filesystem::remove(key_tmp, ec);
    std::filesystem::remove(cert_tmp, ec);
    throw;
  }
}

UserCredential load_user_credential(const std::filesystem::path& cert_path,
                                    const std::filesystem::path& key_path) {
  auto cert = Certificate::from_pem(read_file(cert_path));
  auto key = PrivateKey::from_pem(read_file(key_path));
  if (!(cert.public_key() == key.public_key())) {
    throw CredentialError(Kind::kKeyMismatch, "certificate and private key do not match");
  }
  return {std::move(cert), std::move(key)};
}

std::string make_pkcs12(const Certificate& cert, const PrivateKey* key, std::string_view passphrase) {
  std::string pass(passphrase);
  std::unique_ptr<PKCS12, detail::Deleter<PKCS12, PKCS12_free>> p12(
      PKCS12_create(pass.c_str(), "lgrid credential", key ? key->native() : nullptr, cert.native(),
                    nullptr, 0, 0, 0, 0, 0));
  if (!p12) detail::fail("PKCS12_create");
  auto bio = detail::out_bio();
  if (i2d_PKCS12_bio(bio.get(), p12.get()) != 1) detail::fail("i2d_PKCS12_bio");
  return detail::drain(bio.get());
}

}  // namespace lgrid::pki
