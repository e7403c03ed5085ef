// Copyright 2026 The lgrid Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <optional>
#include <string>

#include "lgrid/delegation/channel.hpp"

namespace lgrid::net {

struct FormPart {
  std::string content;
  std::string content_type = "application/octet-stream";
  std::string filename;
};

/// Header names are lower case.
struct HttpRequest {
  std::string method;
  std::string path;
  std::map<std::string, std::string> query;
  std::map<std::string, std::string> headers;
  std::string body;
  std::string content_type;
  /// multipart/form-data parts by name.
  std::map<std::string, FormPart> parts;
  /// Present when the client authenticated with a certificate.
  std::optional<delegation::PeerIdentity> peer;
};

struct HttpResponse {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
  std::map<std::string, std::string> headers;
};

}  // namespace lgrid::net
