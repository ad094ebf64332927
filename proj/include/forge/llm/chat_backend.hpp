#pragma once

#include <chrono>
#include <string>
#include <vector>

#include "forge/llm/gateway.hpp"
#include "forge/llm/http_json.hpp"

namespace forge::llm {

struct ChatBackendOptions {
  std::string base_url;
  std::string model;
  /// Name of the environment variable holding the bearer token. Unset or
  /// empty variable means no Authorization header.
  std::string api_key_env = "FORGE_API_KEY";
  std::chrono::seconds timeout{120};
};

/// Client for an OpenAI-style `POST {base_url}/chat/completions` endpoint.
class ChatCompletionBackend final : public Backend {
 public:
  explicit ChatCompletionBackend(ChatBackendOptions options);

  std::string id() const override;
  std::vector<std::string> complete(const GenerationRequest& request) override;

  /// The JSON body sent for a request asking for `n` choices.
  util::Json request_body(const GenerationRequest& request, int n) const;

 private:
  ChatBackendOptions options_;
  HttpEndpoint endpoint_;
};

}  // namespace forge::llm
