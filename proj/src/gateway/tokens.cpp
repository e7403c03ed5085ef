// Copyright 2026 The lgrid Authors
// SPDX-License-Identifier: Apache-2.0

#include "lgrid/gateway/tokens.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>

#include "lgrid/pki/digest.hpp"

namespace lgrid::gateway {

// Journal lines: <unix-seconds> TAB issue TAB <sha256(token)> TAB <dn>

TokenTable::TokenTable(std::optional<std::filesystem::path> journal) : journal_(std::move(journal)) {}

std::string TokenTable::issue(const pki::DistinguishedName& dn, pki::Timestamp now) {
  auto token = pki::random_token(16);
  auto digest = pki::sha256_hex(token);
  std::lock_guard lock(mu_);
  if (journal_) {
    std::string line = std::to_string(now.time_since_epoch().count()) + "\tissue\t" + digest + "\t" +
                       dn.str() + "\n";
    int fd = ::open(journal_->c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0600);
    if (fd < 0) throw std::runtime_error("open " + journal_->string() + ": " + std::strerror(errno));
    auto n = ::write(fd, line.data(), line.size());
    int rc = ::fsync(fd);
    ::close(fd);
    if (n != static_cast<ssize_t>(line.size()) || rc != 0) {
      throw std::runtime_error("cannot append to " + journal_->string());
    }
  }
  by_digest_.insert_or_assign(digest, ApiSession{pki::derive_user_id(dn), dn, now});
  return token;
}

std::optional<ApiSession> TokenTable::lookup(std::string_view token) const {
  if (token.empty()) return std::nullopt;
  auto digest = pki::sha256_hex(token);
  std::lock_guard lock(mu_);
  auto it = by_digest_.find(digest);
  if (it == by_digest_.end()) return std::nullopt;
  return it->second;
}

std::size_t TokenTable::load() {
  if (!journal_) return 0;
  std::ifstream in(*journal_);
  std::size_t restored = 0;
  std::string line;
  std::lock_guard lock(mu_);
  while (std::getline(in, line)) {
    if (in.eof()) break;  // unterminated last line: an interrupted append
    std::istringstream fields(line);
    std::string secs, op, digest, dn;
    if (!std::getline(fields, secs, '\t') || !std::getline(fields, op, '\t') ||
        !std::getline(fields, digest, '\t') || !std::getline(fields, dn) || op != "issue") {
      std::cerr << "lgrid: ignoring malformed journal line\n";
      continue;
    }
    try {
      auto parsed = pki::parse_dn(dn);
      pki::Timestamp at{std::chrono::seconds(std::stoll(secs))};
      by_digest_.insert_or_assign(digest, ApiSession{pki::derive_user_id(parsed), parsed, at});
      ++restored;
    } catch (const std::exception& e) {
      std::cerr << "lgrid: ignoring journal line: " << e.what() << "\n";
    }
  }
  return restored;
}

std::size_t TokenTable::size() const {
  std::lock_guard lock(mu_);
  return by_digest_.size();
}

}  // namespace lgrid::gateway
