// Copyright 2026 The lgrid Authors
// SPDX-License-Identifier: Apache-2.0

#include "lgrid/pki/dn.hpp"

#include <algorithm>
#include <array>

#include "lgrid/pki/digest.hpp"

namespace lgrid::pki {

namespace {

constexpr std::array<std::string_view, 8> kKnownTypes = {"C",  "O",  "OU", "CN",
                                                         "L",  "ST", "DC", "emailAddress"};

std::string escape(std::string_view value) {
  std::string out;
  for (char c : value) {
    if (c == '/' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  return out;
}

}  // namespace

bool DistinguishedName::is_known_type(std::string_view type) {
  return std::find(kKnownTypes.begin(), kKnownTypes.end(), type) != kKnownTypes.end();
}

DistinguishedName::DistinguishedName(std::vector<Rdn> rdns) : rdns_(std::move(rdns)) {
  if (rdns_.empty()) throw DnParseError("", "a DN needs at least one RDN");
  for (const auto& rdn : rdns_) {
    if (!is_known_type(rdn.type)) throw DnParseError(rdn.type, "unknown attribute type");
    if (rdn.value.empty()) throw DnParseError(rdn.type + "=", "empty value");
  }
}

std::string DistinguishedName::str() const { return format_dn(*this); }

DistinguishedName DistinguishedName::with_cn(std::string value) const {
  auto rdns = rdns_;
  rdns.push_back({"CN", std::move(value)});
  return DistinguishedName(std::move(rdns));
}

std::optional<DistinguishedName> DistinguishedName::parent() const {
  if (rdns_.size() < 2) return std::nullopt;
  return DistinguishedName(std::vector<Rdn>(rdns_.begin(), rdns_.end() - 1));
}

bool DistinguishedName::extends_by_one_cn(const DistinguishedName& base) const {
  if (rdns_.size() != base.rdns_.size() + 1) return false;
  if (rdns_.back().type != "CN") return false;
  return std::equal(base.rdns_.begin(), base.rdns_.end(), rdns_.begin());
}

DistinguishedName parse_dn(std::string_view text) {
  if (text.empty()) throw DnParseError("", "empty DN");
  if (text.front() != '/') throw DnParseError(std::string(text), "DN must start with '/'");

  // Split on unescaped '/', unescaping as we go.
  std::vector<std::string> raw_segments;
  std::vector<std::string> segments;
  std::string raw, cur;
  for (std::size_t i = 1; i < text.size(); ++i) {
    char c = text[i];
    if (c == '\\') {
      if (i + 1 >= text.size()) throw DnParseError(raw + c, "dangling escape");
      raw += c;
      raw += text[i + 1];
      cur += text[++i];
      continue;
    }
    if (c == '/') {
      raw_segments.push_back(std::exchange(raw, {}));
      segments.push_back(std::exchange(cur, {}));
      continue;
    }
    raw += c;
    cur += c;
  }
  raw_segments.push_back(raw);
  segments.push_back(cur);

  std::vector<Rdn> rdns;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const auto& seg = segments[i];
    // The separator can't be escaped inside a type, so finding '=' in the
    // unescaped text is equivalent to finding it in the raw text.
    auto eq = raw_segments[i].find('=');
    if (eq == std::string::npos) throw DnParseError(raw_segments[i], "missing '='");
    std::string type = raw_segments[i].substr(0, eq);
    std::string value = seg.substr(type.size() + 1);
    if (type.empty()) throw DnParseError(raw_segments[i], "empty attribute type");
    if (!DistinguishedName::is_known_type(type)) {
      throw DnParseError(raw_segments[i], "unknown attribute type");
    }
    if (value.empty()) throw DnParseError(raw_segments[i], "empty value");
    rdns.push_back({std::move(type), std::move(value)});
  }
  return DistinguishedName(std::move(rdns));
}

std::string format_dn(const DistinguishedName& dn) {
  std::string out;
  for (const auto& rdn : dn.rdns()) {
    out += '/';
    out += rdn.type;
    out += '=';
    out += escape(rdn.value);
  }
  return out;
}

UserId::UserId(std::string hex) : hex_(std::move(hex)) {
  if (hex_.size() != 32 ||
      !std::all_of(hex_.begin(), hex_.end(), [](char c) {
        return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f');
      })) {
    throw std::invalid_argument("user id must be 32 lowercase hex characters");
  }
}

UserId derive_user_id(const DistinguishedName& dn) {
  return UserId(sha256_hex(format_dn(dn)).substr(0, 32));
}

}  // namespace lgrid::pki
