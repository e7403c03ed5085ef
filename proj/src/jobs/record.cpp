// Copyright 2026 The lgrid Authors
// SPDX-License-Identifier: Apache-2.0

#include "lgrid/jobs/record.hpp"

#include <cstdio>
#include <ctime>
#include <stdexcept>

#include "lgrid/pki/digest.hpp"

namespace lgrid::jobs {

std::string format_iso8601(TimePoint t) {
  auto ms = t.time_since_epoch().count();
  std::time_t secs = static_cast<std::time_t>(ms / 1000);
  int frac = static_cast<int>(ms % 1000);
  if (frac < 0) {
    frac += 1000;
    --secs;
  }
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char buf[96];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900,
                tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec, frac);
  return buf;
}

std::optional<TimePoint> parse_iso8601(std::string_view s) {
  std::tm tm{};
  int frac = 0, consumed = 0;
  std::string str(s);
  if (std::sscanf(str.c_str(), "%4d-%2d-%2dT%2d:%2d:%2d.%3dZ%n", &tm.tm_year, &tm.tm_mon,
                  &tm.tm_mday, &tm.tm_hour, &tm.tm_min, &tm.tm_sec, &frac, &consumed) != 7 ||
      consumed != static_cast<int>(str.size())) {
    return std::nullopt;
  }
  tm.tm_year -= 1900;
  tm.tm_mon -= 1;
  auto secs = timegm(&tm);
  return TimePoint(std::chrono::milliseconds(static_cast<std::int64_t>(secs) * 1000 + frac));
}

bool is_uuid(std::string_view s) {
  if (s.size() != 36) return false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    bool dash = i == 8 || i == 13 || i == 18 || i == 23;
    char c = s[i];
    if (dash ? c != '-' : !((c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'))) return false;
  }
  return true;
}

JobId JobId::parse(std::string_view text) {
  constexpr std::string_view scheme = "lgrid://";
  if (text.substr(0, scheme.size()) != scheme) throw std::invalid_argument("not an lgrid job id");
  text.remove_prefix(scheme.size());
  auto slash = text.rfind('/');
  if (slash == std::string_view::npos || slash == 0) throw std::invalid_argument("job id without host");
  JobId id{std::string(text.substr(0, slash)), std::string(text.substr(slash + 1))};
  if (!is_uuid(id.uuid)) throw std::invalid_argument("malformed job uuid");
  return id;
}

JobId JobId::generate(std::string host) {
  auto b = pki::random_bytes(16);
  b[6] = static_cast<char>((b[6] & 0x0f) | 0x40);  // version 4
  b[8] = static_cast<char>((b[8] & 0x3f) | 0x80);  // RFC 4122 variant
  auto hex = pki::to_hex(std::span(reinterpret_cast<const std::uint8_t*>(b.data()), b.size()));
  std::string uuid = hex.substr(0, 8) + "-" + hex.substr(8, 4) + "-" + hex.substr(12, 4) + "-" +
                     hex.substr(16, 4) + "-" + hex.substr(20);
  return JobId{std::move(host), std::move(uuid)};
}

bool history_is_legal(const std::vector<HistoryEntry>& history) {
  if (history.empty() || history.front().state != JobState::kSubmitted) return false;
  for (std::size_t i = 1; i < history.size(); ++i) {
    if (!is_legal_transition(history[i - 1].state, history[i].state)) return false;
  }
  return true;
}

std::string format_status_line(const HistoryEntry& e) {
  std::string reason = e.reason;
  for (auto& c : reason) {
    if (c == '\n' || c == '\t' || c == '\r') c = ' ';
  }
  return format_iso8601(e.at) + "\t" + std::string(to_string(e.state)) + "\t" + reason;
}

std::optional<HistoryEntry> parse_status_line(std::string_view line) {
  auto t1 = line.find('\t');
  if (t1 == std::string_view::npos) return std::nullopt;
  auto t2 = line.find('\t', t1 + 1);
  if (t2 == std::string_view::npos) return std::nullopt;
  auto at = parse_iso8601(line.substr(0, t1));
  auto state = parse_job_state(line.substr(t1 + 1, t2 - t1 - 1));
  if (!at || !state) return std::nullopt;
  return HistoryEntry{*state, *at, std::string(line.substr(t2 + 1))};
}

std::vector<HistoryEntry> parse_status_log(std::string_view text) {
  std::vector<HistoryEntry> out;
  std::size_t line_no = 0;
  while (!text.empty()) {
    auto nl = text.find('\n');
    if (nl == std::string_view::npos) break;  // torn final append
    ++line_no;
    auto e = parse_status_line(text.substr(0, nl));
    if (!e) throw std::runtime_error("status.log line " + std::to_string(line_no) + " is malformed");
    out.push_back(std::move(*e));
    text.remove_prefix(nl + 1);
  }
  return out;
}

}  // namespace lgrid::jobs
