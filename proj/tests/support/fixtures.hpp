// Copyright 2026 The lgrid Authors
// SPDX-License-Identifier: Apache-2.0

// Shared test identities and scratch directories.

#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "lgrid/pki/authority.hpp"
#include "lgrid/pki/dn.hpp"
#include "lgrid/pki/proxy.hpp"

namespace lgrid::testing {

struct TestPki {
  pki::DevAuthority ca;
  pki::Identity alice;
  pki::Identity bob;
  pki::Identity host;
  pki::TrustStore trust;

  static const TestPki& get() {
    static const TestPki instance = make();
    return instance;
  }

 private:
  static TestPki make() {
    auto ca = pki::DevAuthority::create(pki::parse_dn("/C=IT/O=Test/CN=Test CA"));
    auto alice = ca.issue_user(pki::parse_dn("/C=IT/O=Test/CN=Alice"));
    auto bob = ca.issue_user(pki::parse_dn("/C=IT/O=Test/CN=Bob"));
    auto host = ca.issue_host(pki::parse_dn("/C=IT/O=Test/CN=localhost"), {"localhost"},
                              {"127.0.0.1"});
    pki::TrustStore trust;
    trust.add(ca.certificate());
    return TestPki{std::move(ca), std::move(alice), std::move(bob), std::move(host),
                   std::move(trust)};
  }
};

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::string tmpl = (std::filesystem::temp_directory_path() / "lgrid-test-XXXXXX").string();
    if (!::mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void spit(const std::filesystem::path& p, const std::string& data) {
  std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  out << data;
}

}  // namespace lgrid::testing
