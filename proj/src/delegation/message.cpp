// Copyright 2026 The lgrid Authors
// SPDX-License-Identifier: Apache-2.0

#include "lgrid/delegation/message.hpp"

#include <nlohmann/json.hpp>

namespace lgrid::delegation {

using nlohmann::json;

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

std::string field(const json& j, const char* name) {
  auto it = j.find(name);
  if (it == j.end() || !it->is_string()) {
    throw WireError(std::string("missing string field '") + name + "'");
  }
  return it->get<std::string>();
}

}  // namespace

std::string frame(std::string_view body) {
  if (body.size() > 0xffffffffu) throw WireError("message too large");
  auto n = static_cast<std::uint32_t>(body.size());
  std::string out;
  out.reserve(4 + body.size());
  out.push_back(static_cast<char>(n >> 24));
  out.push_back(static_cast<char>(n >> 16));
  out.push_back(static_cast<char>(n >> 8));
  out.push_back(static_cast<char>(n));
  out.append(body);
  return out;
}

std::string_view unframe(std::string_view bytes) {
  if (bytes.size() < 4) throw WireError("short frame");
  auto b = [&](int i) { return static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[i])); };
  std::uint32_t n = (b(0) << 24) | (b(1) << 16) | (b(2) << 8) | b(3);
  if (bytes.size() - 4 != n) throw WireError("frame length mismatch");
  return bytes.substr(4);
}

std::string_view type_name(const Message& m) {
  return std::visit(overloaded{
                        [](const Init&) { return "Init"; },
                        [](const CsrReply&) { return "CsrReply"; },
                        [](const SignedProxy&) { return "SignedProxy"; },
                        [](const Ack&) { return "Ack"; },
                        [](const Fault&) { return "Fault"; },
                    },
                    m);
}

std::string to_json(const Message& m) {
  json j = std::visit(
      overloaded{
          [](const Init& v) { return json{{"subject_dn", v.subject_dn}}; },
          [](const CsrReply& v) { return json{{"session_id", v.session_id}, {"csr_pem", v.csr_pem}}; },
          [](const SignedProxy& v) {
            return json{{"session_id", v.session_id}, {"proxy_cert_pem", v.proxy_cert_pem}};
          },
          [](const Ack& v) {
            return json{{"session_id", v.session_id},
                        {"proxy_fingerprint", v.proxy_fingerprint},
                        {"not_after", v.not_after}};
          },
          [](const Fault& v) { return json{{"code", v.code}, {"detail", v.detail}}; },
      },
      m);
  j["type"] = type_name(m);
  return j.dump();
}

Message message_from_json(std::string_view text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw WireError("message is not a JSON object");
  auto type = field(j, "type");
  if (type == "Init") return Init{field(j, "subject_dn")};
  if (type == "CsrReply") return CsrReply{field(j, "session_id"), field(j, "csr_pem")};
  if (type == "SignedProxy") return SignedProxy{field(j, "session_id"), field(j, "proxy_cert_pem")};
  if (type == "Ack") {
    auto it = j.find("not_after");
    if (it == j.end() || !it->is_number_integer()) throw WireError("missing field 'not_after'");
    return Ack{field(j, "session_id"), field(j, "proxy_fingerprint"), it->get<std::int64_t>()};
  }
  if (type == "Fault") return Fault{field(j, "code"), field(j, "detail")};
  throw WireError("unknown message type '" + type + "'");
}

}  // namespace lgrid::delegation
