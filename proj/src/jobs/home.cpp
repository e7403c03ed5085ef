// Copyright 2026 The lgrid Authors
// SPDX-License-Identifier: Apache-2.0

#include "lgrid/jobs/home.hpp"

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>

namespace lgrid::jobs {

namespace fs = std::filesystem;

namespace {

bool is_within(const fs::path& p, const fs::path& base) {
  auto [b, _] = std::mismatch(base.begin(), base.end(), p.begin(), p.end());
  return b == base.end();
}

bool is_hex_user_id(const std::string& s) {
  return s.size() == 32 &&
         std::all_of(s.begin(), s.end(), [](char c) { return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'); });
}

[[noreturn]] void io_error(const std::string& what, const fs::path& p) {
  throw std::runtime_error(what + " " + p.string() + ": " + std::strerror(errno));
}

void write_all(int fd, std::string_view data, const fs::path& p) {
  while (!data.empty()) {
    auto n = ::write(fd, data.data(), data.size());
    if (n < 0) {
      if (errno == EINTR) continue;
      ::close(fd);
      io_error("write", p);
    }
    data.remove_prefix(static_cast<std::size_t>(n));
  }
}

}  // namespace

HomeFs::HomeFs(fs::path state_root, FsObserver observer)
    : root_(fs::absolute(state_root).lexically_normal()), observer_(std::move(observer)) {
  fs::create_directories(homes_dir());
  root_ = fs::canonical(root_);
}

fs::path HomeFs::home_of(const pki::UserId& user) const { return homes_dir() / user.str(); }

fs::path HomeFs::checked(const pki::UserId& actor, FsOp op, const fs::path& p) const {
  auto home = home_of(actor);
  auto lexical = fs::absolute(p).lexically_normal();
  if (!is_within(lexical, home)) {
    throw HomeViolation("operation outside the home of " + actor.str() + ": " + p.string());
  }
  // Symlinks planted by a job must not lead anywhere else either.
  std::error_code ec;
  auto resolved = fs::weakly_canonical(lexical, ec);
  if (!ec && !is_within(resolved, home)) {
    throw HomeViolation("path resolves outside the home of " + actor.str() + ": " + p.string());
  }
  if (observer_) observer_(FsEvent{actor, op, lexical});
  return lexical;
}

void HomeFs::create_dirs(const pki::UserId& actor, const fs::path& dir) const {
  fs::create_directories(checked(actor, FsOp::kCreateDir, dir));
}

void HomeFs::write_atomic(const pki::UserId& actor, const fs::path& file, std::string_view data,
                          unsigned mode) const {
  auto p = checked(actor, FsOp::kWrite, file);
  auto tmp = p;
  tmp += ".tmp";
  int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC | O_NOFOLLOW, mode);
  if (fd < 0) io_error("open", tmp);
  ::fchmod(fd, mode);
  write_all(fd, data, tmp);
  if (::fsync(fd) != 0) {
    ::close(fd);
    io_error("fsync", tmp);
  }
  ::close(fd);
  fs::rename(tmp, p);
}

void HomeFs::append_line(const pki::UserId& actor, const fs::path& file, std::string_view line) const {
  auto p = checked(actor, FsOp::kAppend, file);
  int fd = ::open(p.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC | O_NOFOLLOW, 0644);
  if (fd < 0) io_error("open", p);
  std::string buf(line);
  buf += '\n';
  write_all(fd, buf, p);
  if (::fsync(fd) != 0) {
    ::close(fd);
    io_error("fsync", p);
  }
  ::close(fd);
}

std::string HomeFs::read(const pki::UserId& actor, const fs::path& file) const {
  auto p = checked(actor, FsOp::kRead, file);
  int fd = ::open(p.c_str(), O_RDONLY | O_CLOEXEC | O_NOFOLLOW);
  if (fd < 0) io_error("open", p);
  std::string out;
  char buf[65536];
  for (;;) {
    auto n = ::read(fd, buf, sizeof buf);
    if (n < 0) {
      if (errno == EINTR) continue;
      ::close(fd);
      io_error("read", p);
    }
    if (n == 0) break;
    out.append(buf, static_cast<std::size_t>(n));
  }
  ::close(fd);
  return out;
}

bool HomeFs::exists(const pki::UserId& actor, const fs::path& p) const {
  return fs::exists(checked(actor, FsOp::kStat, p));
}

bool HomeFs::is_regular_file(const pki::UserId& actor, const fs::path& p) const {
  return fs::is_regular_file(fs::symlink_status(checked(actor, FsOp::kStat, p)));
}

void HomeFs::remove_all(const pki::UserId& actor, const fs::path& p) const {
  fs::remove_all(checked(actor, FsOp::kRemove, p));
}

void HomeFs::make_executable(const pki::UserId& actor, const fs::path& file) const {
  fs::permissions(checked(actor, FsOp::kChmod, file),
                  fs::perms::owner_exec | fs::perms::group_exec | fs::perms::others_exec,
                  fs::perm_options::add);
}

std::vector<fs::path> HomeFs::list(const pki::UserId& actor, const fs::path& dir) const {
  auto p = checked(actor, FsOp::kList, dir);
  std::vector<fs::path> out;
  std::error_code ec;
  for (const auto& e : fs::directory_iterator(p, ec)) out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::string> HomeFs::files_under(const pki::UserId& actor, const fs::path& dir) const {
  auto base = checked(actor, FsOp::kList, dir);
  std::vector<std::string> out;
  std::error_code ec;
  for (auto it = fs::recursive_directory_iterator(base, ec); !ec && it != fs::recursive_directory_iterator();
       it.increment(ec)) {
    if (it->is_symlink()) {
      it.disable_recursion_pending();
      continue;
    }
    if (it->is_regular_file()) out.push_back(it->path().lexically_relative(base).generic_string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<pki::UserId> HomeFs::owners() const {
  std::vector<pki::UserId> out;
  std::error_code ec;
  for (const auto& e : fs::directory_iterator(homes_dir(), ec)) {
    auto name = e.path().filename().string();
    if (e.is_directory() && is_hex_user_id(name)) out.emplace_back(name);
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace lgrid::jobs
