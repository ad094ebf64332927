#include "forge/llm/http_json.hpp"

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "httplib.h"

#include "forge/util/error.hpp"

namespace forge::llm {

using util::Json;

HttpEndpoint parse_base_url(const std::string& base_url) {
  const auto scheme_end = base_url.find("://");
  if (scheme_end == std::string::npos) {
    throw PreconditionError("base URL '" + base_url + "' lacks a scheme");
  }
  const auto path_start = base_url.find('/', scheme_end + 3);
  HttpEndpoint ep;
  ep.origin = base_url.substr(0, path_start);
  if (path_start != std::string::npos) {
    ep.path_prefix = base_url.substr(path_start);
    while (!ep.path_prefix.empty() && ep.path_prefix.back() == '/') ep.path_prefix.pop_back();
  }
  return ep;
}

Json post_json(const HttpEndpoint& endpoint, const std::string& path, const Json& body,
               const std::vector<std::pair<std::string, std::string>>& headers,
               std::chrono::seconds timeout) {
  httplib::Client client(endpoint.origin);
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);
  httplib::Headers h;
  for (const auto& [k, v] : headers) h.emplace(k, v);

  const auto url = endpoint.path_prefix + path;
  auto res = client.Post(url, h, body.dump(-1, ' ', false, Json::error_handler_t::replace),
                         "application/json");
  if (!res) {
    throw RetriableError("POST " + endpoint.origin + url + " failed: " + httplib::to_string(res.error()));
  }
  const int status = res->status;
  if (status >= 500 || status == 408 || status == 429) {
    throw RetriableError("POST " + endpoint.origin + url + " returned HTTP " + std::to_string(status));
  }
  if (status < 200 || status >= 300) {
    throw ContentError("POST " + endpoint.origin + url + " returned HTTP " + std::to_string(status),
                       res->body);
  }
  try {
    return Json::parse(res->body);
  } catch (const Json::parse_error&) {
    throw ContentError("POST " + endpoint.origin + url + " returned a non-JSON body", res->body);
  }
}

}  // namespace forge::llm
