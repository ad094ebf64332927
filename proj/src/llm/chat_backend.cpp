#include "forge/llm/chat_backend.hpp"

#include <cstdlib>

#include "forge/util/error.hpp"

namespace forge::llm {

using util::Json;

ChatCompletionBackend::ChatCompletionBackend(ChatBackendOptions options)
    : options_(std::move(options)), endpoint_(parse_base_url(options_.base_url)) {
  if (options_.model.empty()) throw PreconditionError("chat backend needs a model name");
}

std::string ChatCompletionBackend::id() const {
  return "chat:" + options_.model + "@" + options_.base_url;
}

Json ChatCompletionBackend::request_body(const GenerationRequest& request, int n) const {
  Json messages = Json::array();
  if (!request.system_prompt.empty()) {
    messages.push_back({{"role", "system"}, {"content", request.system_prompt}});
  }
  messages.push_back({{"role", "user"}, {"content", request.user_prompt}});
  const bool greedy = request.decoding == Decoding::kGreedy;
  return Json{{"model", options_.model},
              {"messages", std::move(messages)},
              {"max_tokens", request.max_tokens},
              {"n", n},
              {"temperature", greedy ? 0.0 : request.temperature}};
}

std::vector<std::string> ChatCompletionBackend::complete(const GenerationRequest& request) {
  std::vector<std::pair<std::string, std::string>> headers;
  if (const char* key = std::getenv(options_.api_key_env.c_str()); key && *key) {
    headers.emplace_back("Authorization", std::string("Bearer ") + key);
  }

  std::vector<std::string> texts;
  // Some servers cap or ignore `n`; keep asking until enough choices arrive.
  while (texts.size() < static_cast<std::size_t>(request.n_samples)) {
    const int wanted = request.n_samples - static_cast<int>(texts.size());
    const Json reply =
        post_json(endpoint_, "/chat/completions", request_body(request, wanted), headers, options_.timeout);
    const auto choices = reply.find("choices");
    if (choices == reply.end() || !choices->is_array() || choices->empty()) {
      throw ContentError("chat completion reply has no choices", reply.dump());
    }
    for (const auto& choice : *choices) {
      const auto& message = choice.value("message", Json::object());
      if (message.contains("refusal") && message["refusal"].is_string()) {
        throw ContentError("model refused: " + message["refusal"].get<std::string>(), reply.dump());
      }
      const auto content = message.value("content", Json());
      if (!content.is_string() || content.get<std::string>().empty()) {
        throw ContentError("chat completion choice has empty content", reply.dump());
      }
      texts.push_back(content.get<std::string>());
      if (texts.size() == static_cast<std::size_t>(request.n_samples)) break;
    }
  }
  return texts;
}

}  // namespace forge::llm
