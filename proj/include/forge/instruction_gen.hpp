#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "forge/corpus.hpp"
#include "forge/llm/gateway.hpp"
#include "forge/prompts.hpp"
#include "forge/util/io.hpp"

namespace forge::instructions {

struct InstructionRecord {
  std::string instr_id;
  std::string doc_id;
  std::size_t chunk_index = 0;
  std::string topic;
  std::string text;
  int attempts_used = 1;
};

struct Validation {
  bool accepted = false;
  std::string reason;          // set when rejected
  bool topic_missing = false;  // warning only
};

/// Pure predicate over a cleaned candidate question.
Validation validate_instruction(std::string_view text, std::string_view topic);

/// Trims model output down to the proposed question: drops an echoed
/// "Proposed question:" label, surrounding quotes, and anything after the
/// first non-blank line.
std::string clean_question(std::string_view raw);

/// Lowercase, trim, collapse whitespace, strip terminal punctuation.
std::string normalize_instruction(std::string_view text);

/// Keeps the first record for each (doc_id, normalized text).
std::vector<InstructionRecord> dedup_instructions(std::vector<InstructionRecord> records);

prompts::PromptPair render_instruction_prompt(const corpus::DocumentChunk& chunk, std::string_view topic,
                                              std::span<const prompts::QuestionExample> few_shot);

struct DocumentChunks {
  std::string doc_id;
  std::string topic;
  std::vector<corpus::DocumentChunk> chunks;
};

struct GenerationOptions {
  std::size_t per_document = 8;
  int max_attempts = 3;
  double temperature = 1.0;
  int max_tokens = 128;
  std::vector<prompts::QuestionExample> few_shot;
};

struct YieldStats {
  std::size_t attempted = 0;          // generation calls that returned text
  std::size_t accepted = 0;           // passed validation
  std::size_t rejected = 0;           // failed validation
  std::size_t dropped_slots = 0;      // slots abandoned after max_attempts
  std::size_t topic_warnings = 0;     // accepted without mentioning the topic
  std::size_t backend_failures = 0;   // slots lost to backend errors
  std::size_t duplicates_removed = 0;
  std::vector<std::string> failures;  // one line per backend failure

  double yield_rate() const {
    return attempted == 0 ? 0.0 : static_cast<double>(accepted) / static_cast<double>(attempted);
  }
  util::Json to_json() const;
};

struct GenerationOutput {
  std::vector<InstructionRecord> records;
  YieldStats stats;
};

/// Proposes `per_document` questions per document, cycling over the
/// document's chunks (slot i uses chunk i mod chunk count). A slot whose
/// answer fails validation is re-asked up to `max_attempts` times and then
/// dropped. Results are de-duplicated per document; ids are
/// "<doc_id>#q<slot>".
GenerationOutput generate_instructions(std::span<const DocumentChunks> docs, llm::Gateway& gateway,
                                       const GenerationOptions& options);

util::Json to_json(const InstructionRecord& r);
InstructionRecord instruction_from_json(const util::Json& j);

}  // namespace forge::instructions
