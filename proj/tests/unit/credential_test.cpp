// Copyright 2026 The lgrid Authors
// SPDX-License-Identifier: Apache-2.0

// PKCS#12 containers here are built with the openssl command-line tool and
// python's `cryptography`, independent of the code under test.

#include <gtest/gtest.h>
#include <sys/stat.h>

#include "lgrid/pki/credential.hpp"
#include "support/fixtures.hpp"

namespace {

using namespace lgrid::pki;
using lgrid::testing::slurp;
using lgrid::testing::spit;
using lgrid::testing::TempDir;
using lgrid::testing::TestPki;

int run(const std::string& cmd) { return std::system((cmd + " >/dev/null 2>&1").c_str()); }

class Pkcs12 : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto& p = TestPki::get();
    spit(dir / "cert.pem", p.alice.cert.to_pem());
    spit(dir / "key.pem", p.alice.key.export_pem());
    spit(dir / "bobkey.pem", p.bob.key.export_pem());
  }

  std::string path(const char* name) const { return (dir / name).string(); }

  TempDir dir;
};

TEST_F(Pkcs12, ConvertsContainerBuiltByOpensslCli) {
  ASSERT_EQ(run("openssl pkcs12 -export -in " + path("cert.pem") + " -inkey " + path("key.pem") +
                " -passout pass:s3cret -out " + path("alice.p12")),
            0);
  auto pem = convert_credential_container(slurp(dir / "alice.p12"), "s3cret");
  auto cert = Certificate::from_pem(pem.cert_pem);
  auto key = PrivateKey::from_pem(pem.key_pem);
  EXPECT_TRUE(cert.public_key() == key.public_key());
  EXPECT_TRUE(cert == TestPki::get().alice.cert);
}

TEST_F(Pkcs12, WrongPassphrase) {
  ASSERT_EQ(run("openssl pkcs12 -export -in " + path("cert.pem") + " -inkey " + path("key.pem") +
                " -passout pass:s3cret -out " + path("alice.p12")),
            0);
  try {
    convert_credential_container(slurp(dir / "alice.p12"), "nope");
    FAIL();
  } catch (const CredentialError& e) {
    EXPECT_EQ(e.kind(), CredentialError::Kind::kWrongPassphrase);
  }
}

TEST_F(Pkcs12, CertificateOnlyContainer) {
  ASSERT_EQ(run("openssl pkcs12 -export -nokeys -in " + path("cert.pem") +
                " -passout pass:pw -out " + path("certonly.p12")),
            0);
  try {
    convert_credential_container(slurp(dir / "certonly.p12"), "pw");
    FAIL();
  } catch (const CredentialError& e) {
    EXPECT_EQ(e.kind(), CredentialError::Kind::kMissingKey);
  }
}

TEST_F(Pkcs12, MismatchedCertificateAndKey) {
  std::string script =
      "from cryptography.hazmat.primitives.serialization import pkcs12, load_pem_private_key, "
      "BestAvailableEncryption\n"
      "from cryptography import x509\n"
      "key = load_pem_private_key(open('" + path("bobkey.pem") + "','rb').read(), None)\n"
      "cert = x509.load_pem_x509_certificate(open('" + path("cert.pem") + "','rb').read())\n"
      "open('" + path("mismatch.p12") + "','wb').write(pkcs12.serialize_key_and_certificates("
      "b'x', key, None, [cert], BestAvailableEncryption(b'pw')))\n";
  spit(dir / "mk.py", script);
  ASSERT_EQ(run("python3 " + path("mk.py")), 0);
  try {
    convert_credential_container(slurp(dir / "mismatch.p12"), "pw");
    FAIL();
  } catch (const CredentialError& e) {
    EXPECT_EQ(e.kind(), CredentialError::Kind::kKeyMismatch);
  }
}

TEST_F(Pkcs12, GarbageInput) {
  try {
    convert_credential_container("definitely not der", "pw");
    FAIL();
  } catch (const CredentialError& e) {
    EXPECT_EQ(e.kind(), CredentialError::Kind::kMalformed);
  }
}

TEST_F(Pkcs12, OwnPackerIsReadableByOpensslCli) {
  const auto& p = TestPki::get();
  spit(dir / "own.p12", make_pkcs12(p.alice.cert, &p.alice.key, "pw"));
  EXPECT_EQ(run("openssl pkcs12 -in " + path("own.p12") + " -passin pass:pw -nodes -out " +
                path("dump.pem")),
            0);
  EXPECT_NE(slurp(dir / "dump.pem").find("PRIVATE KEY"), std::string::npos);
}

TEST_F(Pkcs12, WritesOwnerOnlyKeyFile) {
  const auto& p = TestPki::get();
  auto pem = convert_credential_container(make_pkcs12(p.alice.cert, &p.alice.key, "pw"), "pw");
  write_pem_credential(pem, dir / "out");
  struct stat st{};
  ASSERT_EQ(::stat((dir / "out" / "userkey.pem").c_str(), &st), 0);
  EXPECT_EQ(st.st_mode & 0777, 0600u);
  auto cred = load_user_credential(dir / "out" / "usercert.pem", dir / "out" / "userkey.pem");
  EXPECT_TRUE(cred.cert == p.alice.cert);
}

TEST_F(Pkcs12, LoadRejectsMismatchedPair) {
  try {
    load_user_credential(dir / "cert.pem", dir / "bobkey.pem");
    FAIL();
  } catch (const CredentialError& e) {
    EXPECT_EQ(e.kind(), CredentialError::Kind::kKeyMismatch);
  }
}

}  // namespace
