#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "forge/corpus.hpp"
#include "forge/instruction_gen.hpp"
#include "forge/llm/gateway.hpp"
#include "forge/util/io.hpp"

namespace forge::preference {

using instructions::InstructionRecord;

/// Candidate responses for one instruction before filtering.
struct PreferenceCandidate {
  std::string instr_id;
  std::string instruction;
  std::string chunk;
  std::string y_c_star;                 // greedy, document in prompt
  std::vector<std::string> y_c;         // K samples, document in prompt
  std::vector<std::string> y_r;         // K samples, no document
  std::optional<std::string> y_r_star;  // greedy, no document (optional)

  std::size_t k() const noexcept { return y_c.size(); }
};

/// K closed-book samples for the no-document preference ablation.
struct AblationCandidate {
  std::string instr_id;
  std::string instruction;
  std::vector<std::string> responses;
};

struct CandidateOptions {
  int k = 10;
  double temperature = 1.0;
  int max_tokens = 512;
  /// Also produce the greedy closed-book response y_r_star.
  bool greedy_without_context = false;
};

struct BuildStats {
  std::size_t requested = 0;
  std::size_t built = 0;
  std::size_t dropped = 0;
  std::vector<std::string> drop_reasons;

  util::Json to_json() const;
};

template <typename Candidate>
struct BuildOutput {
  std::vector<Candidate> candidates;  // sorted by instr_id
  BuildStats stats;
};

/// Per instruction: one greedy and K sampled answers with the source chunk
/// in the prompt, and K sampled answers without it. The two prompts differ
/// only by the presence of prompts::context_block(chunk). Items whose calls
/// fail are dropped with a reason. Unresolvable chunks raise ReferenceError.
BuildOutput<PreferenceCandidate> build_candidates(std::span<const InstructionRecord> instructions,
                                                  const corpus::ChunkIndex& chunks,
                                                  llm::Gateway& sft_model,
                                                  const CandidateOptions& options);

/// K closed-book samples per instruction. Requires K >= 2.
BuildOutput<AblationCandidate> build_ablation_candidates(std::span<const InstructionRecord> instructions,
                                                         llm::Gateway& sft_model, int k,
                                                         double temperature = 1.0,
                                                         int max_tokens = 512);

util::Json to_json(const PreferenceCandidate& c);
PreferenceCandidate candidate_from_json(const util::Json& j);
util::Json to_json(const AblationCandidate& c);
AblationCandidate ablation_candidate_from_json(const util::Json& j);

}  // namespace forge::preference
