#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "forge/util/io.hpp"

namespace forge::config {

/// Roles a backend can be bound to. sft_model is optional and falls back
/// to target_model.
inline const std::vector<std::string> kGenerationRoles = {"instruction_generator", "target_model",
                                                          "rc_teacher", "judge"};
inline constexpr const char* kScorerRole = "scorer";
inline constexpr const char* kSftModelRole = "sft_model";

struct BackendBinding {
  std::string kind = "mock";  // mock | chat
  std::string base_url;
  std::string model;
  std::string api_key_env = "FORGE_API_KEY";
  std::size_t max_parallel = 4;
  int max_retries = 5;
  std::optional<std::filesystem::path> script;     // mock only
  std::optional<std::filesystem::path> knowledge;  // mock only
};

struct ScorerBinding {
  std::string kind = "lexical";  // lexical | nli
  std::string base_url;
  std::string model = "microsoft/deberta-v3-large-mnli";
  int max_retries = 5;
  std::size_t max_parallel = 4;
};

struct PipelineConfig {
  std::filesystem::path base_dir;  // relative paths in the file resolve against this
  std::filesystem::path work_dir;
  std::uint64_t seed = 0;

  // corpus
  std::filesystem::path corpus_root;
  std::vector<std::string> topics;  // empty: discovered from corpus_root
  std::size_t train_per_topic = 100;
  std::size_t eval_per_topic = 10;
  std::string tokenizer = "whitespace";

  // instruction generation
  std::size_t questions_per_document = 8;
  std::size_t chunk_tokens = 512;
  int max_attempts = 3;
  std::optional<std::filesystem::path> question_examples;

  // sft
  double rc_fraction = 1.0 / 3.0;
  std::optional<std::filesystem::path> answer_examples;

  // preferences
  std::size_t k = 10;
  double temperature = 1.0;
  bool greedy_without_context = false;
  bool ablation = false;

  // filter
  double tau_L = 0.5;
  double tau_K = 0.5;
  std::vector<double> sweep = {0.5, 0.6, 0.7, 0.8};
  std::vector<std::size_t> k_sweep = {1, 5, 10};
  bool sentence_level = false;
  std::size_t known_sample = 200;

  // dpo
  double beta = 0.3;
  std::size_t steps = 300;
  double learning_rate = 1.0;

  // judge
  std::optional<std::filesystem::path> responses_a;
  std::optional<std::filesystem::path> responses_b;

  std::map<std::string, BackendBinding> backends;
  ScorerBinding scorer;

  /// Settings a stage depends on, with paths relative to base_dir, for
  /// change detection.
  util::Json section_fingerprint(const std::string& stage) const;
};

/// Command-line overrides applied on top of the file.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<double> tau_K;
  std::optional<std::size_t> k;
  std::optional<std::filesystem::path> corpus_root;
  std::optional<std::filesystem::path> work_dir;
  /// "role.key" -> raw value from --backend.<role>.<key>=value
  std::map<std::string, std::string> backend;
};

/// Parses and checks a config document. Every problem is collected and
/// reported together in a ConfigError. `base_dir` anchors relative paths.
PipelineConfig validate_config(const util::Json& doc, const std::filesystem::path& base_dir,
                               const Overrides& overrides = {});

/// Reads `path` (an empty file is an empty config) and validates it.
PipelineConfig validate_config(const std::filesystem::path& path, const Overrides& overrides = {});

/// Splits "--backend.<role>.<key>=value" (or "--backend.<role>.<key> value")
/// out of argv. Returns the remaining arguments.
std::vector<std::string> extract_backend_overrides(const std::vector<std::string>& args,
                                                   std::map<std::string, std::string>& out);

}  // namespace forge::config
