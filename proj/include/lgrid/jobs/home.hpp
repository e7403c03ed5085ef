// Copyright 2026 The lgrid Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "lgrid/pki/dn.hpp"

namespace lgrid::jobs {

enum class FsOp { kRead, kWrite, kAppend, kCreateDir, kRemove, kList, kStat, kChmod };

struct FsEvent {
  pki::UserId actor;
  FsOp op;
  std::filesystem::path path;
};

using FsObserver = std::function<void(const FsEvent&)>;

class HomeViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Every file operation done on behalf of a user goes through here. Paths
/// must resolve, after following symlinks, inside state-root/homes/<UserId>;
/// anything else throws HomeViolation before touching the disk.
class HomeFs {
 public:
  explicit HomeFs(std::filesystem::path state_root, FsObserver observer = {});

  const std::filesystem::path& root() const noexcept { return root_; }
  std::filesystem::path homes_dir() const { return root_ / "homes"; }
  std::filesystem::path home_of(const pki::UserId& user) const;

  void create_dirs(const pki::UserId& actor, const std::filesystem::path& dir) const;
  /// Temp file, fsync, rename.
  void write_atomic(const pki::UserId& actor, const std::filesystem::path& file,
                    std::string_view data, unsigned mode = 0644) const;
  /// Appends and fsyncs one line; `line` must not contain '\n'.
  void append_line(const pki::UserId& actor, const std::filesystem::path& file,
                   std::string_view line) const;
  std::string read(const pki::UserId& actor, const std::filesystem::path& file) const;
  bool exists(const pki::UserId& actor, const std::filesystem::path& p) const;
  bool is_regular_file(const pki::UserId& actor, const std::filesystem::path& p) const;
  void remove_all(const pki::UserId& actor, const std::filesystem::path& p) const;
  void make_executable(const pki::UserId& actor, const std::filesystem::path& file) const;
  std::vector<std::filesystem::path> list(const pki::UserId& actor,
                                          const std::filesystem::path& dir) const;
  /// Regular files below `dir`, as relative '/'-separated paths. Symlinks
  /// are not followed and not reported.
  std::vector<std::string> files_under(const pki::UserId& actor,
                                       const std::filesystem::path& dir) const;

  /// Owners with a home directory. Not tied to any user.
  std::vector<pki::UserId> owners() const;

 private:
  std::filesystem::path checked(const pki::UserId& actor, FsOp op,
                                const std::filesystem::path& p) const;

  std::filesystem::path root_;
  FsObserver observer_;
};

}  // namespace lgrid::jobs
