// Copyright 2026 The lgrid Authors
// SPDX-License-Identifier: Apache-2.0

#include "lgrid/gateway/policy.hpp"

#include <fnmatch.h>

#include <array>
#include <utility>

namespace lgrid::gateway {

namespace {

constexpr std::array<std::pair<Operation, std::string_view>, 4> kNames = {{
    {Operation::kSubmit, "submit"},
    {Operation::kStatus, "status"},
    {Operation::kOutput, "output"},
    {Operation::kCancel, "cancel"},
}};

bool matches(const VoRule& rule, const std::string& dn) {
  for (const auto& p : rule.members) {
    if (::fnmatch(p.c_str(), dn.c_str(), 0) == 0) return true;
  }
  return false;
}

}  // namespace

std::string_view to_string(Operation op) {
  for (const auto& [o, name] : kNames) {
    if (o == op) return name;
  }
  return "?";
}

std::optional<Operation> parse_operation(std::string_view name) {
  for (const auto& [o, n] : kNames) {
    if (n == name) return o;
  }
  return std::nullopt;
}

void VoPolicy::add(VoRule rule) { rules_.push_back(std::move(rule)); }

std::vector<std::string> VoPolicy::vos_for(const pki::DistinguishedName& dn) const {
  auto text = dn.str();
  std::vector<std::string> out;
  for (const auto& r : rules_) {
    if (matches(r, text)) out.push_back(r.name);
  }
  return out;
}

std::optional<std::string_view> VoPolicy::check(const pki::DistinguishedName& dn,
                                                std::optional<std::string_view> vo, Operation op) const {
  auto text = dn.str();
  bool member = false;
  for (const auto& r : rules_) {
    if (vo && r.name != *vo) continue;
    if (!matches(r, text)) continue;
    member = true;
    if (r.operations.count(op)) return std::nullopt;
  }
  return member ? deny::kNotPermitted : deny::kNoVo;
}

}  // namespace lgrid::gateway
