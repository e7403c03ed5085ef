// Copyright 2026 The lgrid Authors
// SPDX-License-Identifier: Apache-2.0

#include "lgrid/gateway/config.hpp"

#include <cctype>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <variant>
#include <vector>

namespace lgrid::gateway {

namespace fs = std::filesystem;

namespace {

using Value = std::variant<std::string, std::vector<std::string>>;

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

[[noreturn]] void fail(int line, const std::string& msg) {
  throw ConfigError("line " + std::to_string(line) + ": " + msg);
}

// One scalar: "quoted" or a bare word. Advances `s` past it.
std::string scalar(std::string_view& s, int line) {
  s = trim(s);
  if (s.empty()) fail(line, "missing value");
  if (s.front() == '"') {
    std::string out;
    std::size_t i = 1;
    for (; i < s.size() && s[i] != '"'; ++i) {
      if (s[i] == '\\' && i + 1 < s.size()) ++i;
      out += s[i];
    }
    if (i >= s.size()) fail(line, "unterminated string");
    s.remove_prefix(i + 1);
    return out;
  }
  std::size_t i = 0;
  while (i < s.size() && s[i] != ',' && s[i] != ']' && s[i] != '#') ++i;
  auto word = trim(s.substr(0, i));
  s.remove_prefix(i);
  return std::string(word);
}

Value parse_value(std::string_view s, int line) {
  s = trim(s);
  if (!s.empty() && s.front() == '[') {
    s.remove_prefix(1);
    std::vector<std::string> items;
    for (;;) {
      s = trim(s);
      if (s.empty()) fail(line, "unterminated array");
      if (s.front() == ']') {
        s.remove_prefix(1);
        break;
      }
      items.push_back(scalar(s, line));
      s = trim(s);
      if (!s.empty() && s.front() == ',') s.remove_prefix(1);
    }
    s = trim(s);
    if (!s.empty() && s.front() != '#') fail(line, "unexpected text after array");
    return items;
  }
  auto v = scalar(s, line);
  s = trim(s);
  if (!s.empty() && s.front() != '#') fail(line, "unexpected text after value");
  return v;
}

struct Entry {
  Value value;
  int line;
};

const std::string& as_string(const Entry& e, const std::string& key) {
  if (auto* s = std::get_if<std::string>(&e.value)) return *s;
  fail(e.line, key + " must be a single value");
}

std::vector<std::string> as_list(const Entry& e) {
  if (auto* l = std::get_if<std::vector<std::string>>(&e.value)) return *l;
  return {std::get<std::string>(e.value)};
}

long long as_int(const Entry& e, const std::string& key) {
  const auto& s = as_string(e, key);
  long long v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size() || v < 0) fail(e.line, key + " must be a non-negative integer");
  return v;
}

delegation::Endpoint as_endpoint(const Entry& e, const std::string& key) {
  const auto& s = as_string(e, key);
  auto colon = s.rfind(':');
  delegation::Endpoint ep;
  if (colon == std::string::npos) {
    ep.host = s;
  } else {
    ep.host = s.substr(0, colon);
    Entry port{s.substr(colon + 1), e.line};
    ep.port = static_cast<int>(as_int(port, key));
  }
  if (ep.host.empty() || ep.port <= 0 || ep.port > 65535) fail(e.line, key + " must be host:port");
  return ep;
}

}  // namespace

fs::path default_state_root() {
  if (const char* env = std::getenv("LGRID_STATE_ROOT"); env && *env) return env;
  return "lgrid-state";
}

GatewayConfig parse_config(std::string_view text, const fs::path& base_dir) {
  std::map<std::string, Entry> top;
  std::map<std::string, std::map<std::string, Entry>> vos;
  std::vector<std::string> vo_order;
  std::string section;

  std::istringstream in{std::string(text)};
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    auto s = trim(raw);
    if (s.empty() || s.front() == '#') continue;
    if (s.front() == '[') {
      auto close = s.find(']');
      if (close == std::string_view::npos) fail(line, "unterminated section header");
      section = std::string(trim(s.substr(1, close - 1)));
      if (section.rfind("vo.", 0) != 0 || section.size() == 3) fail(line, "unknown section [" + section + "]");
      if (vos.count(section.substr(3))) fail(line, "duplicate section [" + section + "]");
      vos[section.substr(3)];
      vo_order.push_back(section.substr(3));
      continue;
    }
    auto eq = s.find('=');
    if (eq == std::string_view::npos) fail(line, "expected key = value");
    std::string key(trim(s.substr(0, eq)));
    auto& table = section.empty() ? top : vos[section.substr(3)];
    if (table.count(key)) fail(line, "duplicate key " + key);
    table.emplace(key, Entry{parse_value(s.substr(eq + 1), line), line});
  }

  GatewayConfig c;
  auto path = [&](const Entry& e, const std::string& key) {
    fs::path p = as_string(e, key);
    return p.is_absolute() || base_dir.empty() ? p : base_dir / p;
  };
  for (const auto& [key, e] : top) {
    if (key == "listen") {
      c.listen = as_string(e, key);
    } else if (key == "port") {
      c.port = static_cast<int>(as_int(e, key));
      if (c.port > 65535) fail(e.line, "port out of range");
    } else if (key == "state_root") {
      c.state_root = path(e, key);
    } else if (key == "host_name") {
      c.host_name = as_string(e, key);
    } else if (key == "host_cert") {
      c.host_cert = path(e, key);
    } else if (key == "host_key") {
      c.host_key = path(e, key);
    } else if (key == "trust_anchors") {
      c.trust_anchors = path(e, key);
    } else if (key == "executor") {
      c.executor = as_string(e, key);
      if (c.executor != "scripted" && c.executor != "local") fail(e.line, "executor must be scripted or local");
    } else if (key == "stage_delay_ms") {
      c.stage_delay = std::chrono::milliseconds(as_int(e, key));
    } else if (key == "session_deadline_seconds") {
      c.session_deadline = std::chrono::seconds(as_int(e, key));
    } else if (key == "maintenance_interval_ms") {
      c.maintenance_interval = std::chrono::milliseconds(std::max<long long>(1, as_int(e, key)));
    } else if (key == "myproxy") {
      c.renewal.external_endpoint = as_endpoint(e, key);
    } else if (key == "myproxy_rtt_ms") {
      c.myproxy_rtt = std::chrono::milliseconds(as_int(e, key));
    } else if (key == "renewal_threshold_minutes") {
      c.renewal.threshold = std::chrono::minutes(as_int(e, key));
    } else if (key == "renewal_interval_seconds") {
      c.renewal.check_interval = std::chrono::seconds(as_int(e, key));
    } else if (key == "renewal_lifetime_hours") {
      c.renewal.lifetime = std::chrono::hours(as_int(e, key));
    } else {
      fail(e.line, "unknown key " + key);
    }
  }
  if (c.state_root.empty()) c.state_root = default_state_root();

  for (const auto& name : vo_order) {
    const auto& table = vos.at(name);
    VoRule rule{name, {}, {}};
    for (const auto& [key, e] : table) {
      if (key == "members") {
        rule.members = as_list(e);
      } else if (key == "operations") {
        for (const auto& op : as_list(e)) {
          auto parsed = parse_operation(op);
          if (!parsed) fail(e.line, "unknown operation " + op);
          rule.operations.insert(*parsed);
        }
      } else {
        fail(e.line, "unknown key " + key + " in [vo." + name + "]");
      }
    }
    c.policy.add(std::move(rule));
  }
  return c;
}

GatewayConfig load_config(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot read " + file.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config(ss.str(), fs::absolute(file).parent_path());
  } catch (const ConfigError& e) {
    throw ConfigError(file.string() + ": " + e.what());
  }
}

}  // namespace lgrid::gateway
