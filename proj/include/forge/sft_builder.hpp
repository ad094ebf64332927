#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "forge/corpus.hpp"
#include "forge/instruction_gen.hpp"
#include "forge/llm/gateway.hpp"
#include "forge/prompts.hpp"
#include "forge/util/io.hpp"

namespace forge::sft {

using instructions::InstructionRecord;

enum class SftSource { kSelfAnnotated, kTeacherRc };

std::string_view to_string(SftSource source);

struct SftExample {
  std::string instr_id;
  std::string instruction;
  std::string response;
  SftSource source = SftSource::kSelfAnnotated;
  std::optional<std::string> document;  // present iff source == kTeacherRc
};

struct RcSplit {
  std::vector<InstructionRecord> rc_set;
  std::vector<InstructionRecord> sft_set;
};

/// Seeded partition: round(rc_fraction * n) instructions go to the
/// reading-comprehension set. Both halves keep the input order.
RcSplit split_for_rc(std::span<const InstructionRecord> instructions, double rc_fraction,
                     std::uint64_t seed);

struct AnnotationStats {
  std::size_t requested = 0;
  std::size_t produced = 0;
  std::size_t skipped = 0;
  std::size_t mentions_document = 0;  // retained responses that cite the source
  std::vector<std::string> skip_reasons;

  util::Json to_json() const;
};

struct AnnotationOutput {
  std::vector<SftExample> examples;  // sorted by instr_id
  AnnotationStats stats;
};

/// Greedy closed-book answers from the model being trained, prompted with
/// answer examples. Items whose call fails are skipped and reported.
AnnotationOutput self_annotate(std::span<const InstructionRecord> sft_set, llm::Gateway& target_model,
                               std::span<const prompts::AnswerExample> few_shot, int max_tokens = 512);

/// Greedy teacher answers with the source chunk in the prompt. Every
/// instruction's chunk must resolve; the first that does not raises
/// ReferenceError naming the instruction.
AnnotationOutput teacher_rc_annotate(std::span<const InstructionRecord> rc_set, llm::Gateway& teacher,
                                     const corpus::ChunkIndex& chunks, int max_tokens = 512);

/// Union of both annotation outputs ordered by instr_id.
std::vector<SftExample> merge_mixture(std::vector<SftExample> self_annotated,
                                      std::vector<SftExample> teacher_rc);

/// Hyperparameters recommended for training on the exported data.
util::Json reference_hyperparameters();

util::Json to_json(const SftExample& e);
SftExample sft_example_from_json(const util::Json& j);

}  // namespace forge::sft
