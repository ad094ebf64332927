#include "forge/llm/gateway.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include <spdlog/spdlog.h>

#include "forge/util/error.hpp"
#include "forge/util/hash.hpp"
#include "forge/util/io.hpp"

namespace forge::llm {

using util::Json;

std::string_view to_string(Decoding decoding) {
  return decoding == Decoding::kGreedy ? "greedy" : "sample";
}

GenerationRequest GenerationRequest::greedy(std::string system, std::string user, std::string tag,
                                            int max_tokens) {
  GenerationRequest r;
  r.system_prompt = std::move(system);
  r.user_prompt = std::move(user);
  r.temperature = 0.0;
  r.max_tokens = max_tokens;
  r.n_samples = 1;
  r.decoding = Decoding::kGreedy;
  r.request_tag = std::move(tag);
  return r;
}

GenerationRequest GenerationRequest::sample(std::string system, std::string user, int n_samples,
                                            double temperature, std::string tag, int max_tokens) {
  GenerationRequest r;
  r.system_prompt = std::move(system);
  r.user_prompt = std::move(user);
  r.temperature = temperature;
  r.max_tokens = max_tokens;
  r.n_samples = n_samples;
  r.decoding = Decoding::kSample;
  r.request_tag = std::move(tag);
  return r;
}

void validate(const GenerationRequest& request) {
  if (request.n_samples < 1) {
    throw PreconditionError("n_samples must be positive, got " + std::to_string(request.n_samples));
  }
  if (request.max_tokens < 1) {
    throw PreconditionError("max_tokens must be positive, got " + std::to_string(request.max_tokens));
  }
  if (request.decoding == Decoding::kGreedy && request.n_samples != 1) {
    throw PreconditionError("greedy decoding produces exactly one sample");
  }
  if (request.decoding == Decoding::kSample &&
      (!std::isfinite(request.temperature) || request.temperature < 0.0)) {
    throw PreconditionError("temperature must be a nonnegative finite number");
  }
}

std::string canonical_encoding(const GenerationRequest& request, std::string_view backend_id) {
  Json j{{"backend_id", backend_id},
         {"system", request.system_prompt},
         {"user", request.user_prompt},
         {"decoding", to_string(request.decoding)},
         {"max_tokens", request.max_tokens},
         {"n_samples", request.n_samples},
         {"tag", request.request_tag}};
  if (request.decoding == Decoding::kSample) j["temperature"] = request.temperature;
  return j.dump(-1, ' ', false, Json::error_handler_t::replace);
}

std::string cache_key(const GenerationRequest& request, std::string_view backend_id) {
  return util::sha256_hex(canonical_encoding(request, backend_id));
}

ResponseCache::ResponseCache(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const bool exists = std::filesystem::exists(path) && std::filesystem::file_size(path) > 0;
  if (exists) {
    std::ifstream in(path, std::ios::binary);
    std::string line;
    bool header_seen = false;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      Json j;
      try {
        j = Json::parse(line);
      } catch (const Json::parse_error&) {
        spdlog::warn("ignoring torn record in cache '{}'", path.string());
        continue;
      }
      if (!header_seen) {
        if (j.value("format", "") != "forge-generation-cache") {
          throw Error("'" + path.string() + "' is not a generation cache");
        }
        if (j.value("version", 0) != kFormatVersion) {
          throw Error("cache '" + path.string() + "' has unsupported version " +
                      std::to_string(j.value("version", 0)));
        }
        header_seen = true;
        continue;
      }
      entries_.try_emplace(j.at("key").get<std::string>(),
                           j.at("texts").get<std::vector<std::string>>());
    }
  }
  log_.open(path, std::ios::binary | std::ios::app);
  if (!log_) throw Error("cannot open cache '" + path.string() + "' for appending");
  if (!exists) {
    log_ << Json{{"format", "forge-generation-cache"}, {"version", kFormatVersion}}.dump() << '\n';
    log_.flush();
  }
}

std::optional<std::vector<std::string>> ResponseCache::lookup(const std::string& key) const {
  std::lock_guard lock(mutex_);
  if (auto it = entries_.find(key); it != entries_.end()) return it->second;
  return std::nullopt;
}

std::vector<std::string> ResponseCache::commit(const std::string& key,
                                               const std::string& backend_id,
                                               std::vector<std::string> texts) {
  std::lock_guard lock(mutex_);
  auto [it, inserted] = entries_.try_emplace(key, std::move(texts));
  if (inserted && log_.is_open()) {
    log_ << Json{{"key", key}, {"backend_id", backend_id}, {"texts", it->second}}.dump(
                -1, ' ', false, Json::error_handler_t::replace)
         << '\n';
    log_.flush();
  }
  return it->second;
}

std::size_t ResponseCache::size() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

std::chrono::milliseconds RetryPolicy::backoff_for(int failed_attempts) const {
  const double factor = std::pow(multiplier, std::max(0, failed_attempts - 1));
  const double ms = static_cast<double>(initial_backoff.count()) * factor;
  return std::chrono::milliseconds(
      static_cast<long long>(std::min(ms, static_cast<double>(max_backoff.count()))));
}

Gateway::Gateway(std::shared_ptr<Backend> backend, std::shared_ptr<ResponseCache> cache,
                 GatewayOptions options)
    : backend_(std::move(backend)),
      cache_(cache ? std::move(cache) : std::make_shared<ResponseCache>()),
      options_(std::move(options)),
      backend_id_(backend_ ? backend_->id() : std::string{}),
      in_flight_(static_cast<std::ptrdiff_t>(std::max<std::size_t>(1, options_.max_parallel))) {
  if (!backend_) throw PreconditionError("gateway needs a backend");
  options_.max_parallel = std::max<std::size_t>(1, options_.max_parallel);
  if (options_.retry.max_attempts < 1) options_.retry.max_attempts = 1;
  if (!options_.sleep) {
    options_.sleep = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
  }
}

GenerationResult Gateway::generate(const GenerationRequest& request) {
  validate(request);
  const auto key = cache_key(request, backend_id_);
  if (auto hit = cache_->lookup(key)) {
    ++cache_hits_;
    return {std::move(*hit), backend_id_, true};
  }

  auto texts = call_with_retries(request);
  if (texts.size() != static_cast<std::size_t>(request.n_samples)) {
    throw ContentError("backend '" + backend_id_ + "' returned " + std::to_string(texts.size()) +
                           " completions, expected " + std::to_string(request.n_samples),
                       Json(texts).dump());
  }
  for (const auto& t : texts) {
    if (t.empty()) throw ContentError("backend '" + backend_id_ + "' returned an empty completion", "");
  }
  return {cache_->commit(key, backend_id_, std::move(texts)), backend_id_, false};
}

std::vector<std::string> Gateway::call_with_retries(const GenerationRequest& request) {
  for (int attempt = 1;; ++attempt) {
    try {
      in_flight_.acquire();
      struct Release {
        std::counting_semaphore<>& sem;
        ~Release() { sem.release(); }
      } release{in_flight_};
      ++backend_calls_;
      return backend_->complete(request);
    } catch (const RetriableError& e) {
      if (attempt >= options_.retry.max_attempts) {
        throw RetriableError("backend '" + backend_id_ + "' failed after " +
                             std::to_string(attempt) + " attempts: " + e.what());
      }
      const auto delay = options_.retry.backoff_for(attempt);
      spdlog::debug("retrying '{}' in {} ms after: {}", backend_id_, delay.count(), e.what());
      options_.sleep(delay);
    }
  }
}

}  // namespace forge::llm
