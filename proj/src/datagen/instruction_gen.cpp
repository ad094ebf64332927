#include "forge/instruction_gen.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <mutex>
#include <set>

#include <spdlog/spdlog.h>

#include "forge/util/error.hpp"
#include "forge/util/parallel.hpp"
#include "forge/util/text.hpp"

namespace forge::instructions {

using util::Json;

namespace {

constexpr std::array<std::string_view, 4> kDocumentMentions = {
    "the document", "the passage", "the text above", "provided document"};

std::string slot_id(const std::string& doc_id, std::size_t slot) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "#q%02zu", slot);
  return doc_id + buf;
}

}  // namespace

Validation validate_instruction(std::string_view text, std::string_view topic) {
  Validation v;
  const auto trimmed = util::trim(text);
  if (trimmed.empty()) {
    v.reason = "empty";
    return v;
  }
  if (std::count(trimmed.begin(), trimmed.end(), '?') > 1) {
    v.reason = "more than one question";
    return v;
  }
  for (auto phrase : kDocumentMentions) {
    if (util::contains_icase(trimmed, phrase)) {
      v.reason = "mentions the source (\"" + std::string(phrase) + "\")";
      return v;
    }
  }
  v.accepted = true;
  const auto words = util::word_tokens(trimmed);
  const std::set<std::string> present(words.begin(), words.end());
  const auto topic_words = util::word_tokens(topic);
  v.topic_missing = !topic_words.empty() &&
                    std::none_of(topic_words.begin(), topic_words.end(),
                                 [&](const std::string& w) { return present.count(w) > 0; });
  return v;
}

std::string clean_question(std::string_view raw) {
  auto text = util::trim(raw);
  if (text.starts_with(prompts::kProposedQuestionLabel)) {
    text = util::trim(text.substr(prompts::kProposedQuestionLabel.size()));
  }
  const auto nl = text.find('\n');
  if (nl != std::string_view::npos) text = util::trim(text.substr(0, nl));
  if (text.size() >= 2 && (text.front() == '"' || text.front() == '\'') && text.back() == text.front()) {
    text = util::trim(text.substr(1, text.size() - 2));
  }
  return std::string(text);
}

std::string normalize_instruction(std::string_view text) {
  auto out = util::collapse_whitespace(util::to_lower(text));
  while (!out.empty() && std::string_view(".?!;:,").find(out.back()) != std::string_view::npos) {
    out.pop_back();
  }
  return std::string(util::trim(out));
}

std::vector<InstructionRecord> dedup_instructions(std::vector<InstructionRecord> records) {
  std::set<std::pair<std::string, std::string>> seen;
  std::vector<InstructionRecord> kept;
  kept.reserve(records.size());
  for (auto& r : records) {
    if (seen.emplace(r.doc_id, normalize_instruction(r.text)).second) kept.push_back(std::move(r));
  }
  return kept;
}

prompts::PromptPair render_instruction_prompt(const corpus::DocumentChunk& chunk, std::string_view topic,
                                              std::span<const prompts::QuestionExample> few_shot) {
  if (util::trim(chunk.text).empty()) {
    throw PreconditionError("chunk " + chunk.doc_id + "/" + std::to_string(chunk.chunk_index) +
                            " is empty");
  }
  return prompts::instruction_prompt(chunk.text, topic, few_shot);
}

Json YieldStats::to_json() const {
  return Json{{"attempted", attempted},
              {"accepted", accepted},
              {"rejected", rejected},
              {"dropped_slots", dropped_slots},
              {"topic_warnings", topic_warnings},
              {"backend_failures", backend_failures},
              {"duplicates_removed", duplicates_removed},
              {"yield_rate", yield_rate()},
              {"failures", failures}};
}

GenerationOutput generate_instructions(std::span<const DocumentChunks> docs, llm::Gateway& gateway,
                                       const GenerationOptions& options) {
  if (options.per_document < 1) throw PreconditionError("questions per document must be at least 1");
  if (options.max_attempts < 1) throw PreconditionError("max_attempts must be at least 1");

  struct DocOutcome {
    std::vector<InstructionRecord> records;
    YieldStats stats;
  };
  std::vector<DocOutcome> outcomes(docs.size());

  util::parallel_for(docs.size(), gateway.max_parallel(), [&](std::size_t d) {
    const auto& doc = docs[d];
    auto& out = outcomes[d];
    if (doc.chunks.empty()) return;
    for (std::size_t slot = 0; slot < options.per_document; ++slot) {
      const auto& chunk = doc.chunks[slot % doc.chunks.size()];
      const auto prompt = render_instruction_prompt(chunk, doc.topic, options.few_shot);
      bool accepted = false;
      for (int attempt = 1; attempt <= options.max_attempts && !accepted; ++attempt) {
        const auto tag = "instruction|" + slot_id(doc.doc_id, slot) + "|" + std::to_string(attempt);
        std::string text;
        try {
          const auto result = gateway.generate(llm::GenerationRequest::sample(
              prompt.system, prompt.user, 1, options.temperature, tag, options.max_tokens));
          text = clean_question(result.texts.front());
        } catch (const Error& e) {
          ++out.stats.backend_failures;
          out.stats.failures.push_back(slot_id(doc.doc_id, slot) + ": " + e.what());
          spdlog::warn("instruction slot {} lost: {}", slot_id(doc.doc_id, slot), e.what());
          break;
        }
        ++out.stats.attempted;
        const auto v = validate_instruction(text, doc.topic);
        if (!v.accepted) {
          ++out.stats.rejected;
          if (attempt == options.max_attempts) ++out.stats.dropped_slots;
          continue;
        }
        accepted = true;
        ++out.stats.accepted;
        if (v.topic_missing) ++out.stats.topic_warnings;
        out.records.push_back({slot_id(doc.doc_id, slot), doc.doc_id, chunk.chunk_index, doc.topic,
                               std::move(text), attempt});
      }
    }
  });

  GenerationOutput output;
  std::vector<InstructionRecord> all;
  for (auto& o : outcomes) {
    std::move(o.records.begin(), o.records.end(), std::back_inserter(all));
    auto& s = output.stats;
    s.attempted += o.stats.attempted;
    s.accepted += o.stats.accepted;
    s.rejected += o.stats.rejected;
    s.dropped_slots += o.stats.dropped_slots;
    s.topic_warnings += o.stats.topic_warnings;
    s.backend_failures += o.stats.backend_failures;
    std::move(o.stats.failures.begin(), o.stats.failures.end(), std::back_inserter(s.failures));
  }
  const auto before = all.size();
  output.records = dedup_instructions(std::move(all));
  output.stats.duplicates_removed = before - output.records.size();
  return output;
}

Json to_json(const InstructionRecord& r) {
  return Json{{"instr_id", r.instr_id},       {"doc_id", r.doc_id}, {"chunk_index", r.chunk_index},
              {"topic", r.topic},             {"text", r.text},     {"attempts_used", r.attempts_used}};
}

InstructionRecord instruction_from_json(const Json& j) {
  return {j.at("instr_id").get<std::string>(), j.at("doc_id").get<std::string>(),
          j.at("chunk_index").get<std::size_t>(), j.value("topic", std::string{}),
          j.at("text").get<std::string>(), j.value("attempts_used", 1)};
}

}  // namespace forge::instructions
