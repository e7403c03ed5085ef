// Copyright 2026 The lgrid Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace lgrid::jobs {

// Sandboxes travel as gzip-compressed ustar archives of regular files.

struct SandboxEntry {
  std::string path;  // relative, '/'-separated
  std::string bytes;
  bool operator==(const SandboxEntry&) const = default;
};

class SandboxError : public std::runtime_error {
 public:
  enum class Kind { kCorrupt, kPathEscape, kUnsupported, kIo };
  SandboxError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

/// Normalizes "./a//b" to "a/b". Throws kPathEscape for absolute paths,
/// ".." components, empty paths and NUL bytes.
std::string checked_relative_path(std::string_view path);

/// Entries keep their order. Duplicate paths are rejected.
std::string pack(const std::vector<SandboxEntry>& entries);
/// Accepts ustar, GNU long names and pax path records. Directory entries are
/// skipped; links and devices are rejected.
std::vector<SandboxEntry> unpack(std::string_view archive);

std::string gzip_compress(std::string_view raw);
std::string gzip_decompress(std::string_view compressed, std::size_t limit = 1u << 30);

/// Reads the named files relative to `root`.
std::vector<SandboxEntry> collect_files(const std::filesystem::path& root,
                                        const std::vector<std::string>& relative_paths);

}  // namespace lgrid::jobs
