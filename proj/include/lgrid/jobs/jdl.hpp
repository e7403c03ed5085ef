// Copyright 2026 The lgrid Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace lgrid::jobs {

// JDL, the ClassAd subset used by gLite:
//
//   [ Attribute = value; ... ]
//
// value   := "string" | integer | true | false | { value, ... } | [ record ]
//          | anything else up to the terminator, kept verbatim (Requirements, Rank)
// comments: '#' and '//' to end of line, '/* ... */'
//
// Attribute names compare case-insensitively. The outer brackets are optional.

struct JdlAttribute;

struct JdlExpression {
  std::string text;
  bool operator==(const JdlExpression&) const = default;
};

struct JdlValue {
  using List = std::vector<JdlValue>;
  using Record = std::vector<JdlAttribute>;

  std::variant<std::string, std::int64_t, bool, List, Record, JdlExpression> v;

  bool is_string() const { return std::holds_alternative<std::string>(v); }
  bool is_integer() const { return std::holds_alternative<std::int64_t>(v); }
  bool is_list() const { return std::holds_alternative<List>(v); }
  bool is_record() const { return std::holds_alternative<Record>(v); }

  bool operator==(const JdlValue& other) const;
};

struct JdlAttribute {
  std::string name;
  JdlValue value;
  bool operator==(const JdlAttribute&) const = default;
};

inline bool JdlValue::operator==(const JdlValue& other) const { return v == other.v; }

class JdlError : public std::runtime_error {
 public:
  /// line/column are 1-based; 0 when the error is not tied to a position.
  JdlError(const std::string& message, int line = 0, int column = 0);

  int line() const noexcept { return line_; }
  int column() const noexcept { return column_; }
  const std::string& message() const noexcept { return message_; }

 private:
  std::string message_;
  int line_;
  int column_;
};

enum class JobKind { kNormal, kParametric, kCollection };

std::string_view to_string(JobKind k);

struct ParameterRange {
  std::int64_t start = 0;
  std::int64_t step = 1;
  std::int64_t bound = 0;  // exclusive
  bool operator==(const ParameterRange&) const = default;
};

struct JobDescriptor {
  JobKind kind = JobKind::kNormal;
  /// Everything except Nodes and the parameter attributes, in source order.
  std::vector<JdlAttribute> attributes;
  std::vector<JobDescriptor> nodes;
  std::variant<std::monostate, ParameterRange, JdlValue::List> parameters;

  const JdlValue* find(std::string_view name) const;
  std::optional<std::string> string_attr(std::string_view name) const;
  /// String elements of a list attribute; a lone string counts as one element.
  std::vector<std::string> string_list(std::string_view name) const;
  void set(std::string_view name, JdlValue value);
  void erase(std::string_view name);

  bool operator==(const JobDescriptor&) const = default;
};

inline constexpr std::string_view kParamPlaceholder = "_PARAM_";

/// Parses and validates. Throws JdlError with a position for syntax errors
/// and without one for missing Executable, empty collections and the like.
JobDescriptor parse_jdl(std::string_view text);

/// Attribute list only, no interpretation.
std::vector<JdlAttribute> parse_attributes(std::string_view text);

/// Canonical text; parse_jdl(format_jdl(d)) == d.
std::string format_jdl(const JobDescriptor& d);
std::string format_value(const JdlValue& v);

/// Concrete Normal descriptors, in parameter order then node order.
/// Throws JdlError for step <= 0, bound <= start, an empty value list or an
/// empty collection.
std::vector<JobDescriptor> expand(const JobDescriptor& d);

}  // namespace lgrid::jobs
