// Copyright 2026 The lgrid Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace lgrid::pki {

/// One relative distinguished name, e.g. ("CN", "Alice").
struct Rdn {
  std::string type;
  std::string value;

  friend bool operator==(const Rdn&, const Rdn&) = default;
};

class DnParseError : public std::runtime_error {
 public:
  DnParseError(std::string segment, const std::string& why)
      : std::runtime_error("malformed DN segment '" + segment + "': " + why),
        segment_(std::move(segment)) {}

  const std::string& segment() const noexcept { return segment_; }

 private:
  std::string segment_;
};

/// Ordered list of RDNs. Always holds at least one RDN of a known type.
///
/// The canonical text form is the OpenSSL one-line form, "/C=IT/O=Test/CN=Alice",
/// with '/' and '\' inside values escaped by a backslash.
class DistinguishedName {
 public:
  explicit DistinguishedName(std::vector<Rdn> rdns);

  const std::vector<Rdn>& rdns() const noexcept { return rdns_; }
  std::size_t size() const noexcept { return rdns_.size(); }
  const Rdn& back() const noexcept { return rdns_.back(); }

  std::string str() const;

  /// Copy with one more CN appended.
  DistinguishedName with_cn(std::string value) const;

  /// The name with its terminal RDN removed, if anything remains.
  std::optional<DistinguishedName> parent() const;

  /// True iff this == base + exactly one terminal CN.
  bool extends_by_one_cn(const DistinguishedName& base) const;

  friend bool operator==(const DistinguishedName&, const DistinguishedName&) = default;

  static bool is_known_type(std::string_view type);

 private:
  std::vector<Rdn> rdns_;
};

DistinguishedName parse_dn(std::string_view text);
std::string format_dn(const DistinguishedName& dn);

/// Filesystem-safe user identity: the first 128 bits of SHA-256 over the
/// canonical DN text, as 32 lowercase hex characters.
class UserId {
 public:
  explicit UserId(std::string hex);

  const std::string& str() const noexcept { return hex_; }

  friend bool operator==(const UserId&, const UserId&) = default;
  friend auto operator<=>(const UserId&, const UserId&) = default;

 private:
  std::string hex_;
};

UserId derive_user_id(const DistinguishedName& dn);

}  // namespace lgrid::pki

template <>
struct std::hash<lgrid::pki::UserId> {
  std::size_t operator()(const lgrid::pki::UserId& id) const noexcept {
    return std::hash<std::string>{}(id.str());
  }
};
