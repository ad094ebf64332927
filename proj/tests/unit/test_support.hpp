#pragma once

#include <atomic>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <random>
#include <string>
#include <unistd.h>
#include <vector>

#include "forge/llm/gateway.hpp"
#include "forge/llm/mock_backend.hpp"
#include "forge/util/error.hpp"

namespace forge::testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("forge_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

// Backend driven by a lambda; counts calls.
class LambdaBackend final : public llm::Backend {
 public:
  using Fn = std::function<std::vector<std::string>(const llm::GenerationRequest&)>;
  explicit LambdaBackend(Fn fn, std::string id = "lambda") : fn_(std::move(fn)), id_(std::move(id)) {}

  std::string id() const override { return id_; }
  std::vector<std::string> complete(const llm::GenerationRequest& request) override {
    ++calls;
    return fn_(request);
  }

  std::atomic<int> calls{0};

 private:
  Fn fn_;
  std::string id_;
};

inline llm::GatewayOptions no_sleep(std::size_t max_parallel = 1) {
  llm::GatewayOptions o;
  o.max_parallel = max_parallel;
  o.sleep = [](std::chrono::milliseconds) {};
  return o;
}

inline std::unique_ptr<llm::Gateway> make_gateway(std::shared_ptr<llm::Backend> backend,
                                                  std::size_t max_parallel = 1) {
  return std::make_unique<llm::Gateway>(std::move(backend), std::make_shared<llm::ResponseCache>(),
                                        no_sleep(max_parallel));
}

inline std::unique_ptr<llm::Gateway> demo_gateway(llm::DemoModelOptions options = {}) {
  return make_gateway(llm::mock_backend({}, llm::demo_model(std::move(options))));
}

}  // namespace forge::testing
