// Copyright 2026 The lgrid Authors
// SPDX-License-Identifier: Apache-2.0

#include "lgrid/delegation/proxy_store.hpp"

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <fstream>
#include <sstream>

namespace lgrid::delegation {

namespace fs = std::filesystem;

ProxyStore::ProxyStore(pki::TrustStore trust, pki::ProxyOptions options,
                       std::optional<fs::path> dir)
    : trust_(std::move(trust)), options_(options), dir_(std::move(dir)) {
  if (dir_) fs::create_directories(*dir_);
}

StoredProxy ProxyStore::put(const std::string& bundle, pki::Timestamp now) {
  auto parsed = pki::parse_proxy_bundle(bundle);
  auto report = pki::validate_proxy_chain(parsed, trust_, now, options_);
  if (!report.ok()) throw StoreError("proxy rejected: " + report.summary(), report);

  StoredProxy entry{bundle, parsed.proxy_cert.not_after(), parsed.proxy_cert.fingerprint(),
                    parsed.user_dn()};
  auto user = pki::derive_user_id(entry.user_dn);

  std::lock_guard lock(mu_);
  persist(user, bundle);
  entries_.insert_or_assign(user, entry);
  return entry;
}

std::optional<StoredProxy> ProxyStore::get(const pki::UserId& user) const {
  std::lock_guard lock(mu_);
  auto it = entries_.find(user);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

bool ProxyStore::valid_at(const pki::UserId& user, pki::Timestamp at) const {
  auto entry = get(user);
  if (!entry) return false;
  return pki::validate_proxy_chain(entry->bundle, trust_, at, options_).ok();
}

void ProxyStore::erase(const pki::UserId& user) {
  std::lock_guard lock(mu_);
  entries_.erase(user);
  if (dir_) {
    std::error_code ec;
    fs::remove(*dir_ / (user.str() + ".pem"), ec);
  }
}

std::vector<pki::UserId> ProxyStore::users() const {
  std::lock_guard lock(mu_);
  std::vector<pki::UserId> out;
  for (const auto& [user, _] : entries_) out.push_back(user);
  return out;
}

std::size_t ProxyStore::load() {
  if (!dir_) return 0;
  std::size_t loaded = 0;
  for (const auto& f : fs::directory_iterator(*dir_)) {
    if (f.path().extension() != ".pem") continue;
    std::ifstream in(f.path(), std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    try {
      auto bundle = ss.str();
      auto parsed = pki::parse_proxy_bundle(bundle);
      StoredProxy entry{bundle, parsed.proxy_cert.not_after(), parsed.proxy_cert.fingerprint(),
                        parsed.user_dn()};
      std::lock_guard lock(mu_);
      entries_.insert_or_assign(pki::derive_user_id(entry.user_dn), std::move(entry));
      ++loaded;
    } catch (const std::exception&) {
      continue;
    }
  }
  return loaded;
}

void ProxyStore::persist(const pki::UserId& user, const std::string& bundle) const {
  if (!dir_) return;
  auto final_path = *dir_ / (user.str() + ".pem");
  auto tmp = *dir_ / ("." + user.str() + ".pem.tmp");
  int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0600);
  if (fd < 0) throw std::runtime_error("cannot write " + tmp.string());
  ::fchmod(fd, 0600);
  bool ok = ::write(fd, bundle.data(), bundle.size()) == static_cast<ssize_t>(bundle.size());
  ok = ::fsync(fd) == 0 && ok;
  ::close(fd);
  if (!ok) throw std::runtime_error("short write on " + tmp.string());
  fs::rename(tmp, final_path);
}

}  // namespace lgrid::delegation
