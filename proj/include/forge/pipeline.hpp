#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "forge/config.hpp"
#include "forge/llm/gateway.hpp"
#include "forge/scorer.hpp"
#include "forge/util/io.hpp"

namespace forge::pipeline {

enum class Stage { kIngest, kGenInstructions, kBuildSft, kBuildPreferences, kFilter, kSweep, kDpoVerify, kJudge };

std::string_view to_string(Stage stage);
Stage parse_stage(std::string_view name);
/// All stages in dataflow order.
const std::vector<Stage>& all_stages();

/// Artifact file names inside the work directory.
namespace artifacts {
inline constexpr const char* kDocuments = "documents.jsonl";
inline constexpr const char* kChunks = "chunks.jsonl";
inline constexpr const char* kIngestStats = "ingest.stats.json";
inline constexpr const char* kInstructions = "instructions.jsonl";
inline constexpr const char* kInstructionStats = "instructions.stats.json";
inline constexpr const char* kSft = "sft.jsonl";
inline constexpr const char* kSftMeta = "sft.meta.json";
inline constexpr const char* kPreferences = "preferences.jsonl";
inline constexpr const char* kAblation = "ablation.jsonl";
inline constexpr const char* kPreferenceStats = "preferences.stats.json";
inline constexpr const char* kDStar = "dstar.jsonl";
inline constexpr const char* kDStarAblation = "dstar_ablation.jsonl";
inline constexpr const char* kDecisions = "filter.decisions.jsonl";
inline constexpr const char* kFilterStats = "filter.stats.json";
inline constexpr const char* kKnown = "known.jsonl";
inline constexpr const char* kSweepTable = "sweep.tsv";
inline constexpr const char* kSweepReport = "sweep.json";
inline constexpr const char* kDpoTrajectory = "dpo_trajectory.tsv";
inline constexpr const char* kDpoReport = "dpo.json";
inline constexpr const char* kVerdicts = "verdicts.jsonl";
inline constexpr const char* kJudgeSummary = "judge_summary.tsv";
inline constexpr const char* kJudgeReport = "judge.json";
inline constexpr const char* kManifest = "manifest.json";
inline constexpr const char* kCacheDir = "cache";
}  // namespace artifacts

struct StageReport {
  Stage stage = Stage::kIngest;
  bool skipped = false;  // inputs, settings and outputs unchanged since the last run
  std::vector<std::string> artifacts;
  util::Json summary;
};

struct RunOptions {
  bool force = false;  // rerun even when the manifest says the stage is current
};

class Pipeline {
 public:
  explicit Pipeline(config::PipelineConfig config, RunOptions options = {});
  ~Pipeline();

  /// Runs one stage. Throws MissingArtifactError when an input artifact is
  /// absent. Outputs are written atomically and recorded in the manifest.
  StageReport run_stage(Stage stage);

  /// Runs every stage in order.
  std::vector<StageReport> run_all();

  const config::PipelineConfig& config() const noexcept { return config_; }

 private:
  std::map<std::string, std::string> input_hashes(Stage stage) const;
  util::Json execute(Stage stage, std::vector<std::string>& written);

  util::Json ingest(std::vector<std::string>& written);
  util::Json gen_instructions(std::vector<std::string>& written);
  util::Json build_sft(std::vector<std::string>& written);
  util::Json build_preferences(std::vector<std::string>& written);
  util::Json run_filter(std::vector<std::string>& written);
  util::Json run_sweep(std::vector<std::string>& written);
  util::Json dpo_verify(std::vector<std::string>& written);
  util::Json run_judge(std::vector<std::string>& written);

  llm::Gateway& gateway(const std::string& role);
  const filter::ContradictionScorer& scorer();
  std::filesystem::path artifact(std::string_view name) const;
  std::filesystem::path require(std::string_view name, Stage producer) const;

  config::PipelineConfig config_;
  RunOptions options_;
  std::shared_ptr<llm::ResponseCache> cache_;
  std::map<std::string, std::unique_ptr<llm::Gateway>> gateways_;
  std::shared_ptr<filter::ContradictionScorer> scorer_;
};

}  // namespace forge::pipeline
