#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace forge::llm {

enum class Decoding { kGreedy, kSample };

std::string_view to_string(Decoding decoding);

struct GenerationRequest {
  std::string system_prompt;
  std::string user_prompt;
  double temperature = 1.0;
  int max_tokens = 512;
  int n_samples = 1;
  Decoding decoding = Decoding::kSample;
  /// Distinguishes otherwise identical prompts in the cache (e.g. retry
  /// attempts that must not be served the previous rejected answer).
  std::string request_tag;

  static GenerationRequest greedy(std::string system, std::string user, std::string tag,
                                  int max_tokens = 512);
  static GenerationRequest sample(std::string system, std::string user, int n_samples,
                                  double temperature, std::string tag, int max_tokens = 512);
};

/// Throws PreconditionError when the request is malformed.
void validate(const GenerationRequest& request);

/// Canonical JSON encoding of everything that determines a backend's answer.
/// Temperature is omitted for greedy decoding, where it is ignored.
std::string canonical_encoding(const GenerationRequest& request, std::string_view backend_id);

/// sha256 of canonical_encoding.
std::string cache_key(const GenerationRequest& request, std::string_view backend_id);

struct GenerationResult {
  std::vector<std::string> texts;
  std::string backend_id;
  bool cached = false;
};

/// A text-generation service. Implementations must be safe to call from
/// several threads at once.
class Backend {
 public:
  virtual ~Backend() = default;
  virtual std::string id() const = 0;
  /// Returns request.n_samples completions. Throws RetriableError for
  /// transport or server-side failures, ContentError for unusable answers.
  virtual std::vector<std::string> complete(const GenerationRequest& request) = 0;
};

/// Append-only key-value log of completions.
///
/// File format (version 1), one JSON object per line:
///   {"format":"forge-generation-cache","version":1}
///   {"key":"<sha256 hex>","backend_id":"...","texts":["...", ...]}
///
/// The first record for a key wins; later duplicates are never written. A
/// torn final line (interrupted append) is ignored on load.
class ResponseCache {
 public:
  static constexpr int kFormatVersion = 1;

  /// In-memory cache with no backing file.
  ResponseCache() = default;
  /// Loads the log at `path` (creating it if absent) and appends to it.
  explicit ResponseCache(const std::filesystem::path& path);

  ResponseCache(const ResponseCache&) = delete;
  ResponseCache& operator=(const ResponseCache&) = delete;

  std::optional<std::vector<std::string>> lookup(const std::string& key) const;

  /// Stores texts under key unless the key is already present. Returns the
  /// texts now associated with the key.
  std::vector<std::string> commit(const std::string& key, const std::string& backend_id,
                                  std::vector<std::string> texts);

  std::size_t size() const;

 private:
  mutable std::mutex mutex_;
  std::unordered_map<std::string, std::vector<std::string>> entries_;
  std::ofstream log_;
};

struct RetryPolicy {
  int max_attempts = 5;
  std::chrono::milliseconds initial_backoff{250};
  double multiplier = 2.0;
  std::chrono::milliseconds max_backoff{8000};

  std::chrono::milliseconds backoff_for(int failed_attempts) const;
};

struct GatewayOptions {
  std::size_t max_parallel = 4;
  RetryPolicy retry;
  /// Injected so tests can retry without wall-clock delays.
  std::function<void(std::chrono::milliseconds)> sleep;
};

/// Caching, retrying, concurrency-bounded front end to one backend.
class Gateway {
 public:
  Gateway(std::shared_ptr<Backend> backend, std::shared_ptr<ResponseCache> cache,
          GatewayOptions options = {});

  /// Serves from the cache when possible; otherwise calls the backend (with
  /// retries on RetriableError) and commits the answer before returning it.
  GenerationResult generate(const GenerationRequest& request);

  const std::string& backend_id() const noexcept { return backend_id_; }
  std::size_t max_parallel() const noexcept { return options_.max_parallel; }
  std::size_t backend_calls() const noexcept { return backend_calls_.load(); }
  std::size_t cache_hits() const noexcept { return cache_hits_.load(); }

 private:
  std::vector<std::string> call_with_retries(const GenerationRequest& request);

  std::shared_ptr<Backend> backend_;
  std::shared_ptr<ResponseCache> cache_;
  GatewayOptions options_;
  std::string backend_id_;
  std::counting_semaphore<> in_flight_;
  std::atomic<std::size_t> backend_calls_{0};
  std::atomic<std::size_t> cache_hits_{0};
};

}  // namespace forge::llm
