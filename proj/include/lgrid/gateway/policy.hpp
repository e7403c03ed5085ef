// Copyright 2026 The lgrid Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "lgrid/pki/dn.hpp"

namespace lgrid::gateway {

enum class Operation { kSubmit, kStatus, kOutput, kCancel };

std::string_view to_string(Operation op);
std::optional<Operation> parse_operation(std::string_view name);

namespace deny {
inline constexpr std::string_view kInvalidToken = "invalid-token";
inline constexpr std::string_view kProxyExpired = "proxy-expired";
inline constexpr std::string_view kNoVo = "no-vo";
inline constexpr std::string_view kNotPermitted = "operation-not-permitted";
}  // namespace deny

struct VoRule {
  std::string name;
  /// fnmatch(3) patterns over the slash-form DN; '*' also matches '/'.
  std::vector<std::string> members;
  std::set<Operation> operations;
};

/// Static VO membership table. A DN that matches no rule gets nothing.
class VoPolicy {
 public:
  void add(VoRule rule);

  /// VOs whose member patterns match `dn`, in configuration order.
  std::vector<std::string> vos_for(const pki::DistinguishedName& dn) const;

  /// Empty on allow, otherwise deny::kNoVo or deny::kNotPermitted. Without
  /// `vo`, any VO the DN belongs to may grant the operation.
  std::optional<std::string_view> check(const pki::DistinguishedName& dn, std::optional<std::string_view> vo,
                                        Operation op) const;

  const std::vector<VoRule>& rules() const noexcept { return rules_; }

 private:
  std::vector<VoRule> rules_;
};

}  // namespace lgrid::gateway
