#include "forge/sft_builder.hpp"

#include <algorithm>
#include <cmath>

#include <spdlog/spdlog.h>

#include "forge/util/error.hpp"
#include "forge/util/parallel.hpp"
#include "forge/util/rng.hpp"
#include "forge/util/text.hpp"

namespace forge::sft {

using util::Json;

std::string_view to_string(SftSource source) {
  return source == SftSource::kSelfAnnotated ? "self_annotated" : "teacher_rc";
}

RcSplit split_for_rc(std::span<const InstructionRecord> instructions, double rc_fraction,
                     std::uint64_t seed) {
  if (!(rc_fraction >= 0.0 && rc_fraction <= 1.0)) {
    throw PreconditionError("rc_fraction must lie in [0, 1]");
  }
  const auto n = instructions.size();
  const auto rc_count = static_cast<std::size_t>(std::llround(rc_fraction * static_cast<double>(n)));
  util::DeterministicRng rng(seed);
  const auto picked = rng.sample_indices(n, rc_count);

  RcSplit split;
  std::size_t next = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (next < picked.size() && picked[next] == i) {
      split.rc_set.push_back(instructions[i]);
      ++next;
    } else {
      split.sft_set.push_back(instructions[i]);
    }
  }
  return split;
}

Json AnnotationStats::to_json() const {
  return Json{{"requested", requested},
              {"produced", produced},
              {"skipped", skipped},
              {"mentions_document", mentions_document},
              {"skip_reasons", skip_reasons}};
}

namespace {

std::string require_text(const std::string& raw, const std::string& instr_id) {
  const auto text = util::trim(raw);
  if (text.empty()) throw ContentError(instr_id + ": blank response", raw);
  return std::string(text);
}

template <typename MakeExample>
AnnotationOutput annotate(std::span<const InstructionRecord> items, llm::Gateway& gateway,
                          MakeExample&& make) {
  std::vector<std::optional<SftExample>> slots(items.size());
  std::vector<std::string> errors(items.size());
  util::parallel_for(items.size(), gateway.max_parallel(), [&](std::size_t i) {
    try {
      slots[i] = make(items[i]);
    } catch (const ReferenceError&) {
      throw;
    } catch (const Error& e) {
      errors[i] = items[i].instr_id + ": " + e.what();
    }
  });

  AnnotationOutput out;
  out.stats.requested = items.size();
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (slots[i]) {
      if (util::contains_icase(slots[i]->response, "the document")) ++out.stats.mentions_document;
      out.examples.push_back(std::move(*slots[i]));
    } else {
      spdlog::warn("annotation skipped {}", errors[i]);
      out.stats.skip_reasons.push_back(std::move(errors[i]));
    }
  }
  out.stats.produced = out.examples.size();
  out.stats.skipped = items.size() - out.examples.size();
  std::sort(out.examples.begin(), out.examples.end(),
            [](const SftExample& a, const SftExample& b) { return a.instr_id < b.instr_id; });
  return out;
}

}  // namespace

AnnotationOutput self_annotate(std::span<const InstructionRecord> sft_set, llm::Gateway& target_model,
                               std::span<const prompts::AnswerExample> few_shot, int max_tokens) {
  if (few_shot.empty()) {
    throw PreconditionError("self-annotation needs at least one answer example");
  }
  return annotate(sft_set, target_model, [&](const InstructionRecord& r) {
    const auto prompt = prompts::self_annotation_prompt(r.text, few_shot);
    auto result = target_model.generate(llm::GenerationRequest::greedy(
        prompt.system, prompt.user, "sft|" + r.instr_id, max_tokens));
    return SftExample{r.instr_id, r.text, require_text(result.texts.front(), r.instr_id),
                      SftSource::kSelfAnnotated, std::nullopt};
  });
}

AnnotationOutput teacher_rc_annotate(std::span<const InstructionRecord> rc_set, llm::Gateway& teacher,
                                     const corpus::ChunkIndex& chunks, int max_tokens) {
  for (const auto& r : rc_set) {
    if (!chunks.find(r.doc_id, r.chunk_index)) {
      throw ReferenceError("instruction " + r.instr_id + " references missing chunk " + r.doc_id +
                           "/" + std::to_string(r.chunk_index));
    }
  }
  return annotate(rc_set, teacher, [&](const InstructionRecord& r) {
    const std::string document(util::trim(chunks.find(r.doc_id, r.chunk_index)->text));
    const auto prompt = prompts::reading_comprehension_prompt(r.text, document);
    auto result = teacher.generate(
        llm::GenerationRequest::greedy(prompt.system, prompt.user, "rc|" + r.instr_id, max_tokens));
    return SftExample{r.instr_id, r.text, require_text(result.texts.front(), r.instr_id),
                      SftSource::kTeacherRc, document};
  });
}

std::vector<SftExample> merge_mixture(std::vector<SftExample> self_annotated,
                                      std::vector<SftExample> teacher_rc) {
  std::vector<SftExample> all = std::move(self_annotated);
  std::move(teacher_rc.begin(), teacher_rc.end(), std::back_inserter(all));
  std::sort(all.begin(), all.end(),
            [](const SftExample& a, const SftExample& b) { return a.instr_id < b.instr_id; });
  return all;
}

Json reference_hyperparameters() {
  return Json{
      {"sft",
       {{"learning_rate", {{"1.1B", 2e-5}, {"7B", 1e-5}, {"13B", 1e-5}}}, {"early_stopping", true}}},
      {"dpo",
       {{"learning_rate", {{"1.1B", 1e-6}, {"7B", 5e-7}, {"13B", 5e-7}}},
        {"beta", 0.3},
        {"steps", 300},
        {"batch_size", 32}}},
      {"sampling", {{"temperature", 1.0}, {"k", 10}}}};
}

Json to_json(const SftExample& e) {
  Json j{{"instr_id", e.instr_id},
         {"instruction", e.instruction},
         {"response", e.response},
         {"source", to_string(e.source)}};
  if (e.document) j["document"] = *e.document;
  return j;
}

SftExample sft_example_from_json(const Json& j) {
  SftExample e;
  e.instr_id = j.at("instr_id").get<std::string>();
  e.instruction = j.at("instruction").get<std::string>();
  e.response = j.at("response").get<std::string>();
  const auto source = j.at("source").get<std::string>();
  if (source == "self_annotated") {
    e.source = SftSource::kSelfAnnotated;
  } else if (source == "teacher_rc") {
    e.source = SftSource::kTeacherRc;
  } else {
    throw Error("unknown SFT source '" + source + "'");
  }
  if (j.contains("document")) e.document = j.at("document").get<std::string>();
  if (e.document.has_value() != (e.source == SftSource::kTeacherRc)) {
    throw Error("SFT record " + e.instr_id + ": document must be present exactly for teacher_rc");
  }
  return e;
}

}  // namespace forge::sft
