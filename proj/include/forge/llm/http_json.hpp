#pragma once

#include <chrono>
#include <string>
#include <utility>
#include <vector>

#include "forge/util/io.hpp"

namespace forge::llm {

struct HttpEndpoint {
  /// scheme://host[:port] portion, as accepted by the HTTP client.
  std::string origin;
  /// Path prefix without trailing slash, possibly empty (e.g. "/v1").
  std::string path_prefix;
};

/// Splits "http://host:8080/v1/" into {"http://host:8080", "/v1"}.
HttpEndpoint parse_base_url(const std::string& base_url);

/// POSTs a JSON body and parses a JSON reply. Connection failures and 5xx
/// (plus 408/429) raise RetriableError; other non-2xx statuses and
/// unparseable bodies raise ContentError carrying the raw body.
util::Json post_json(const HttpEndpoint& endpoint, const std::string& path, const util::Json& body,
                     const std::vector<std::pair<std::string, std::string>>& headers,
                     std::chrono::seconds timeout);

}  // namespace forge::llm
