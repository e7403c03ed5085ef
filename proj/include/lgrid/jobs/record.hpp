// Copyright 2026 The lgrid Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lgrid/jobs/jdl.hpp"
#include "lgrid/jobs/state.hpp"
#include "lgrid/pki/dn.hpp"

namespace lgrid::jobs {

using TimePoint = std::chrono::time_point<std::chrono::system_clock, std::chrono::milliseconds>;

inline TimePoint now_ms() {
  return std::chrono::time_point_cast<std::chrono::milliseconds>(std::chrono::system_clock::now());
}

/// "2026-10-16T08:30:00.125Z"
std::string format_iso8601(TimePoint t);
std::optional<TimePoint> parse_iso8601(std::string_view s);

/// "lgrid://<host>/<uuid>"
struct JobId {
  std::string host;
  std::string uuid;

  std::string str() const { return "lgrid://" + host + "/" + uuid; }
  /// Throws std::invalid_argument.
  static JobId parse(std::string_view text);
  static JobId generate(std::string host);

  friend bool operator==(const JobId&, const JobId&) = default;
  friend auto operator<=>(const JobId&, const JobId&) = default;
};

bool is_uuid(std::string_view s);

struct HistoryEntry {
  JobState state;
  TimePoint at;
  std::string reason;
  bool operator==(const HistoryEntry&) const = default;
};

struct JobRecord {
  JobId id;
  pki::UserId owner;
  pki::DistinguishedName owner_dn;
  JobDescriptor descriptor;
  JobState state = JobState::kSubmitted;
  std::vector<HistoryEntry> history;
  std::filesystem::path home;  // the job directory inside the owner's home
  std::string proxy_fingerprint;
  std::optional<int> exit_code;
  std::string batch;  // shared by every job of one submission
  std::uint64_t seq = 0;

  std::filesystem::path input_dir() const { return home / "input"; }
  std::filesystem::path work_dir() const { return home / "work"; }
  std::filesystem::path output_dir() const { return home / "output"; }
};

/// First entry SUBMITTED, every later pair a legal transition.
bool history_is_legal(const std::vector<HistoryEntry>& history);

/// One status.log line: ISO8601 TAB STATE TAB reason (no newline).
std::string format_status_line(const HistoryEntry& e);
std::optional<HistoryEntry> parse_status_line(std::string_view line);
/// Parses every complete line. A trailing line without '\n', left by a crash
/// mid-append, is ignored. Throws std::runtime_error on a malformed complete line.
std::vector<HistoryEntry> parse_status_log(std::string_view text);

}  // namespace lgrid::jobs
