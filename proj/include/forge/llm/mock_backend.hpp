#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "forge/llm/gateway.hpp"

namespace forge::llm {

/// Produces the text for sample `sample_index` of a request. Must be a pure
/// function of its arguments.
using FallbackFn = std::function<std::string(const GenerationRequest&, int sample_index)>;

/// Identifies a prompt in a mock script: sha256 of system + '\x1e' + user.
std::string prompt_fingerprint(std::string_view system, std::string_view user);

/// Prompt fingerprint -> canned outputs. Sample i of a scripted prompt
/// returns outputs[i % outputs.size()].
using MockScript = std::map<std::string, std::vector<std::string>>;

/// Reads a JSONL script. Each record carries "outputs" and either a
/// "fingerprint" or the literal "system"/"user" prompt.
MockScript load_mock_script(const std::filesystem::path& path);

/// Deterministic backend for hermetic runs.
class MockBackend final : public Backend {
 public:
  MockBackend(MockScript script, FallbackFn fallback, std::string id = "mock");

  std::string id() const override { return id_; }
  std::vector<std::string> complete(const GenerationRequest& request) override;

 private:
  MockScript script_;
  FallbackFn fallback_;
  std::string id_;
};

std::shared_ptr<MockBackend> mock_backend(MockScript script, FallbackFn fallback = {});

struct DemoModelOptions {
  /// Text the simulated model "memorised" during pre-training. Closed-book
  /// questions whose answer appears here are answered from it; others get
  /// a hallucinated answer.
  std::vector<std::string> knowledge;
};

/// A rule-based stand-in for a language model that recognises the toolkit's
/// prompt shapes (question proposal, reading comprehension, closed-book
/// answering, pairwise judging) and answers them plausibly. Outputs depend
/// only on (request, sample_index).
FallbackFn demo_model(DemoModelOptions options = {});

}  // namespace forge::llm
