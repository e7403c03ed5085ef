// Copyright 2026 The lgrid Authors
// SPDX-License-Identifier: Apache-2.0

#include "lgrid/jobs/jdl.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>

namespace lgrid::jobs {

namespace {

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) ==
                  std::tolower(static_cast<unsigned char>(y));
         });
}

bool is_ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool is_ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.';
}

class Parser {
 public:
  explicit Parser(std::string_view text) : s_(text) {}

  std::vector<JdlAttribute> document() {
    skip();
    bool bracketed = peek() == '[';
    if (bracketed) ++pos_;
    auto attrs = statements(bracketed ? ']' : '\0');
    if (bracketed) {
      expect(']');
      skip();
    }
    if (!at_end()) error("unexpected text after the last statement");
    return attrs;
  }

 private:
  [[noreturn]] void error(const std::string& msg) const { error_at(pos_, msg); }

  [[noreturn]] void error_at(std::size_t at, const std::string& msg) const {
    int line = 1, col = 1;
    for (std::size_t i = 0; i < at && i < s_.size(); ++i) {
      if (s_[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw JdlError(msg, line, col);
  }

  bool at_end() const { return pos_ >= s_.size(); }
  char peek() const { return at_end() ? '\0' : s_[pos_]; }

  void expect(char c) {
    skip();
    if (peek() != c) error(std::string("expected '") + c + "'");
    ++pos_;
  }

  // Whitespace and comments.
  void skip() {
    while (!at_end()) {
      char c = s_[pos_];
      if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else if (c == '#' || s_.substr(pos_, 2) == "//") {
        while (!at_end() && s_[pos_] != '\n') ++pos_;
      } else if (s_.substr(pos_, 2) == "/*") {
        auto end = s_.find("*/", pos_ + 2);
        if (end == std::string_view::npos) error("unterminated comment");
        pos_ = end + 2;
      } else {
        break;
      }
    }
  }

  std::vector<JdlAttribute> statements(char closer) {
    std::vector<JdlAttribute> out;
    for (;;) {
      skip();
      if (at_end() || peek() == closer) return out;
      auto name_at = pos_;
      if (!is_ident_start(peek())) error("expected attribute name");
      while (!at_end() && is_ident_char(peek())) ++pos_;
      std::string name(s_.substr(name_at, pos_ - name_at));
      for (const auto& a : out) {
        if (iequals(a.name, name)) error_at(name_at, "duplicate attribute " + name);
      }
      expect('=');
      std::string terminators = closer == ']' ? ";]" : ";";
      auto value = parse_value(terminators);
      out.push_back({std::move(name), std::move(value)});
      skip();
      if (peek() == ';') {
        ++pos_;
      } else if (!(at_end() || peek() == closer)) {
        error("expected ';'");
      }
    }
  }

  bool at_terminator(std::string_view terms) {
    skip();
    return at_end() ? terms.find(';') != std::string_view::npos : terms.find(peek()) != std::string_view::npos;
  }

  JdlValue parse_value(std::string_view terms) {
    skip();
    auto start = pos_;
    if (at_end() || terms.find(peek()) != std::string_view::npos) error("empty value");

    std::optional<JdlValue> literal = try_literal();
    if (literal && at_terminator(terms)) return *literal;

    pos_ = start;
    return JdlValue{expression(terms)};
  }

  std::optional<JdlValue> try_literal() {
    char c = peek();
    if (c == '"') return JdlValue{string_literal()};
    if (std::isdigit(static_cast<unsigned char>(c)) ||
        (c == '-' && pos_ + 1 < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_ + 1])))) {
      auto begin = pos_;
      if (c == '-') ++pos_;
      while (!at_end() && std::isdigit(static_cast<unsigned char>(peek()))) ++pos_;
      if (!at_end() && (is_ident_char(peek()))) return std::nullopt;  // 1.5, 3e2, 12abc
      std::int64_t n = 0;
      auto [p, ec] = std::from_chars(s_.data() + begin, s_.data() + pos_, n);
      if (ec != std::errc()) error_at(begin, "integer out of range");
      return JdlValue{n};
    }
    if (is_ident_start(c)) {
      auto begin = pos_;
      while (!at_end() && is_ident_char(peek())) ++pos_;
      auto word = s_.substr(begin, pos_ - begin);
      if (iequals(word, "true")) return JdlValue{true};
      if (iequals(word, "false")) return JdlValue{false};
      return std::nullopt;
    }
    if (c == '{') {
      ++pos_;
      JdlValue::List items;
      skip();
      if (peek() == '}') {
        ++pos_;
        return JdlValue{std::move(items)};
      }
      for (;;) {
        items.push_back(parse_value(",};"));
        skip();
        if (peek() == ',') {
          ++pos_;
          continue;
        }
        if (peek() == '}') {
          ++pos_;
          return JdlValue{std::move(items)};
        }
        error("expected ',' or '}' in list");
      }
    }
    if (c == '[') {
      ++pos_;
      auto attrs = statements(']');
      expect(']');
      return JdlValue{std::move(attrs)};
    }
    return std::nullopt;
  }

  std::string string_literal() {
    auto begin = pos_;
    ++pos_;
    std::string out;
    while (!at_end() && peek() != '"') {
      char c = s_[pos_++];
      if (c == '\n') error_at(begin, "unterminated string");
      if (c == '\\') {
        if (at_end()) break;
        char e = s_[pos_++];
        switch (e) {
          case 'n':
            out += '\n';
            break;
          case 't':
            out += '\t';
            break;
          default:
            out += e;
        }
      } else {
        out += c;
      }
    }
    if (at_end()) error_at(begin, "unterminated string");
    ++pos_;
    return out;
  }

  // Raw text up to a terminator at nesting depth zero.
  JdlExpression expression(std::string_view terms) {
    auto begin = pos_;
    std::vector<char> stack;
    while (!at_end()) {
      char c = peek();
      if (stack.empty() && terms.find(c) != std::string_view::npos) break;
      if (c == '"') {
        string_literal();
        continue;
      }
      if (stack.empty() && is_ident_start(c) && (pos_ == begin || !is_ident_char(s_[pos_ - 1]))) {
        // `name =` cannot occur inside an expression; it is the next
        // statement after a missing ';'.
        auto ident = pos_;
        while (!at_end() && is_ident_char(peek())) ++pos_;
        auto after = pos_;
        while (after < s_.size() && std::isspace(static_cast<unsigned char>(s_[after]))) ++after;
        if (after < s_.size() && s_[after] == '=' &&
            (after + 1 >= s_.size() || std::string_view("=?!").find(s_[after + 1]) == std::string_view::npos)) {
          error_at(ident, "expected ';' before " + std::string(s_.substr(ident, pos_ - ident)));
        }
        continue;
      }
      if (c == '(' || c == '{' || c == '[') {
        stack.push_back(c == '(' ? ')' : c == '{' ? '}' : ']');
      } else if (c == ')' || c == '}' || c == ']') {
        if (stack.empty() || stack.back() != c) error(std::string("unbalanced '") + c + "'");
        stack.pop_back();
      }
      ++pos_;
    }
    if (!stack.empty()) error_at(begin, "unbalanced brackets in expression");
    std::string text(s_.substr(begin, pos_ - begin));
    while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back()))) text.pop_back();
    if (text.empty()) error_at(begin, "empty value");
    return JdlExpression{std::move(text)};
  }

  std::string_view s_;
  std::size_t pos_ = 0;
};

const JdlValue* find_in(const std::vector<JdlAttribute>& attrs, std::string_view name) {
  for (const auto& a : attrs) {
    if (iequals(a.name, name)) return &a.value;
  }
  return nullptr;
}

std::optional<std::string> string_in(const std::vector<JdlAttribute>& attrs, std::string_view name) {
  auto* v = find_in(attrs, name);
  if (v && v->is_string()) return std::get<std::string>(v->v);
  return std::nullopt;
}

void erase_in(std::vector<JdlAttribute>& attrs, std::string_view name) {
  std::erase_if(attrs, [&](const JdlAttribute& a) { return iequals(a.name, name); });
}

std::int64_t integer_attr(const std::vector<JdlAttribute>& attrs, std::string_view name,
                          std::int64_t fallback) {
  auto* v = find_in(attrs, name);
  if (!v) return fallback;
  if (!v->is_integer()) throw JdlError(std::string(name) + " must be an integer");
  return std::get<std::int64_t>(v->v);
}

JobDescriptor interpret(std::vector<JdlAttribute> attrs) {
  JobDescriptor d;
  auto type = string_in(attrs, "Type");
  auto job_type = string_in(attrs, "JobType");

  if (type && iequals(*type, "Collection")) {
    d.kind = JobKind::kCollection;
    auto* nodes = find_in(attrs, "Nodes");
    if (!nodes) throw JdlError("collection without Nodes");
    if (!nodes->is_list()) throw JdlError("Nodes must be a list of records");
    for (const auto& n : std::get<JdlValue::List>(nodes->v)) {
      if (!n.is_record()) throw JdlError("Nodes must be a list of records");
      d.nodes.push_back(interpret(std::get<JdlValue::Record>(n.v)));
    }
    erase_in(attrs, "Nodes");
    if (d.nodes.empty()) throw JdlError("collection has no nodes");
    if (find_in(attrs, "Executable")) throw JdlError("a collection cannot have an Executable");
    d.attributes = std::move(attrs);
    return d;
  }
  if (type && !iequals(*type, "Job")) throw JdlError("unsupported Type \"" + *type + "\"");

  if (job_type && iequals(*job_type, "Parametric")) {
    d.kind = JobKind::kParametric;
    auto* params = find_in(attrs, "Parameters");
    if (!params) throw JdlError("parametric job without Parameters");
    if (params->is_list()) {
      d.parameters = std::get<JdlValue::List>(params->v);
    } else if (params->is_integer()) {
      d.parameters = ParameterRange{integer_attr(attrs, "ParameterStart", 0),
                                    integer_attr(attrs, "ParameterStep", 1),
                                    std::get<std::int64_t>(params->v)};
    } else {
      throw JdlError("Parameters must be an integer bound or a list");
    }
    erase_in(attrs, "Parameters");
    erase_in(attrs, "ParameterStart");
    erase_in(attrs, "ParameterStep");
  }

  auto* exe = find_in(attrs, "Executable");
  if (!exe) throw JdlError("missing mandatory attribute Executable");
  if (!exe->is_string()) throw JdlError("Executable must be a string");
  d.attributes = std::move(attrs);
  return d;
}

void append_escaped(std::string& out, const std::string& s) {
  out += '"';
  for (char c : s) {
    if (c == '"' || c == '\\') {
      out += '\\';
      out += c;
    } else if (c == '\n') {
      out += "\\n";
    } else if (c == '\t') {
      out += "\\t";
    } else {
      out += c;
    }
  }
  out += '"';
}

void format_into(std::string& out, const JdlValue& v, int indent);

void format_attrs(std::string& out, const std::vector<JdlAttribute>& attrs, int indent) {
  for (const auto& a : attrs) {
    out.append(indent, ' ');
    out += a.name + " = ";
    format_into(out, a.value, indent);
    out += ";\n";
  }
}

void format_into(std::string& out, const JdlValue& v, int indent) {
  std::visit(
      [&](const auto& x) {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, std::string>) {
          append_escaped(out, x);
        } else if constexpr (std::is_same_v<T, std::int64_t>) {
          out += std::to_string(x);
        } else if constexpr (std::is_same_v<T, bool>) {
          out += x ? "true" : "false";
        } else if constexpr (std::is_same_v<T, JdlValue::List>) {
          out += '{';
          for (std::size_t i = 0; i < x.size(); ++i) {
            if (i) out += ", ";
            format_into(out, x[i], indent);
          }
          out += '}';
        } else if constexpr (std::is_same_v<T, JdlValue::Record>) {
          out += "[\n";
          format_attrs(out, x, indent + 2);
          out.append(indent, ' ');
          out += ']';
        } else {
          out += x.text;
        }
      },
      v.v);
}

JdlValue::Record to_record(const JobDescriptor& d) {
  JdlValue::Record attrs = d.attributes;
  if (auto* r = std::get_if<ParameterRange>(&d.parameters)) {
    attrs.push_back({"Parameters", JdlValue{r->bound}});
    attrs.push_back({"ParameterStart", JdlValue{r->start}});
    attrs.push_back({"ParameterStep", JdlValue{r->step}});
  } else if (auto* l = std::get_if<JdlValue::List>(&d.parameters)) {
    attrs.push_back({"Parameters", JdlValue{*l}});
  }
  if (d.kind == JobKind::kCollection) {
    JdlValue::List nodes;
    for (const auto& n : d.nodes) nodes.push_back(JdlValue{to_record(n)});
    attrs.push_back({"Nodes", JdlValue{std::move(nodes)}});
  }
  return attrs;
}

std::string replace_all(std::string s, std::string_view from, std::string_view to) {
  for (auto at = s.find(from); at != std::string::npos; at = s.find(from, at + to.size())) {
    s.replace(at, from.size(), to);
  }
  return s;
}

void substitute(JdlValue& v, std::string_view value) {
  if (auto* s = std::get_if<std::string>(&v.v)) {
    *s = replace_all(std::move(*s), kParamPlaceholder, value);
  } else if (auto* l = std::get_if<JdlValue::List>(&v.v)) {
    for (auto& item : *l) substitute(item, value);
  }
}

JobDescriptor instantiate(const JobDescriptor& d, std::string_view value) {
  JobDescriptor job;
  job.attributes = d.attributes;
  erase_in(job.attributes, "JobType");
  for (auto& a : job.attributes) substitute(a.value, value);
  return job;
}

}  // namespace

JdlError::JdlError(const std::string& message, int line, int column)
    : std::runtime_error(line > 0 ? std::to_string(line) + ":" + std::to_string(column) + ": " + message
                                  : message),
      message_(message),
      line_(line),
      column_(column) {}

std::string_view to_string(JobKind k) {
  switch (k) {
    case JobKind::kNormal:
      return "Normal";
    case JobKind::kParametric:
      return "Parametric";
    case JobKind::kCollection:
      return "Collection";
  }
  return "?";
}

const JdlValue* JobDescriptor::find(std::string_view name) const { return find_in(attributes, name); }

std::optional<std::string> JobDescriptor::string_attr(std::string_view name) const {
  return string_in(attributes, name);
}

std::vector<std::string> JobDescriptor::string_list(std::string_view name) const {
  std::vector<std::string> out;
  auto* v = find(name);
  if (!v) return out;
  if (v->is_string()) {
    out.push_back(std::get<std::string>(v->v));
  } else if (v->is_list()) {
    for (const auto& item : std::get<JdlValue::List>(v->v)) {
      if (item.is_string()) out.push_back(std::get<std::string>(item.v));
    }
  }
  return out;
}

void JobDescriptor::set(std::string_view name, JdlValue value) {
  for (auto& a : attributes) {
    if (iequals(a.name, name)) {
      a.value = std::move(value);
      return;
    }
  }
  attributes.push_back({std::string(name), std::move(value)});
}

void JobDescriptor::erase(std::string_view name) { erase_in(attributes, name); }

std::vector<JdlAttribute> parse_attributes(std::string_view text) { return Parser(text).document(); }

JobDescriptor parse_jdl(std::string_view text) {
  auto attrs = parse_attributes(text);
  if (attrs.empty()) throw JdlError("empty job description", 1, 1);
  return interpret(std::move(attrs));
}

std::string format_value(const JdlValue& v) {
  std::string out;
  format_into(out, v, 0);
  return out;
}

std::string format_jdl(const JobDescriptor& d) {
  std::string out = "[\n";
  format_attrs(out, to_record(d), 2);
  out += "]\n";
  return out;
}

std::vector<JobDescriptor> expand(const JobDescriptor& d) {
  switch (d.kind) {
    case JobKind::kNormal:
      return {d};
    case JobKind::kParametric: {
      std::vector<JobDescriptor> out;
      if (auto* r = std::get_if<ParameterRange>(&d.parameters)) {
        if (r->step <= 0) throw JdlError("ParameterStep must be positive");
        if (r->bound <= r->start) throw JdlError("Parameters must exceed ParameterStart");
        for (std::int64_t v = r->start; v < r->bound; v += r->step) {
          out.push_back(instantiate(d, std::to_string(v)));
        }
      } else if (auto* l = std::get_if<JdlValue::List>(&d.parameters)) {
        if (l->empty()) throw JdlError("empty parameter list");
        for (const auto& v : *l) {
          out.push_back(instantiate(d, v.is_string() ? std::get<std::string>(v.v) : format_value(v)));
        }
      } else {
        throw JdlError("parametric job without Parameters");
      }
      return out;
    }
    case JobKind::kCollection: {
      if (d.nodes.empty()) throw JdlError("collection has no nodes");
      std::vector<JobDescriptor> out;
      for (const auto& n : d.nodes) {
        auto part = expand(n);
        out.insert(out.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
      }
      return out;
    }
  }
  return {};
}

}  // namespace lgrid::jobs
