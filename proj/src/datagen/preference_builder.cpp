#include "forge/preference_builder.hpp"

#include <algorithm>

#include <spdlog/spdlog.h>

#include "forge/prompts.hpp"
#include "forge/util/error.hpp"
#include "forge/util/parallel.hpp"
#include "forge/util/text.hpp"

namespace forge::preference {

using util::Json;

Json BuildStats::to_json() const {
  return Json{{"requested", requested}, {"built", built}, {"dropped", dropped}, {"drop_reasons", drop_reasons}};
}

namespace {

std::vector<std::string> trimmed(std::vector<std::string> texts, const std::string& instr_id) {
  for (auto& t : texts) {
    const auto view = util::trim(t);
    if (view.empty()) throw ContentError(instr_id + ": blank response", t);
    t = std::string(view);
  }
  return texts;
}

template <typename Candidate, typename Make>
BuildOutput<Candidate> build_all(std::span<const InstructionRecord> instructions, llm::Gateway& gateway,
                                 Make&& make) {
  std::vector<std::optional<Candidate>> slots(instructions.size());
  std::vector<std::string> errors(instructions.size());
  util::parallel_for(instructions.size(), gateway.max_parallel(), [&](std::size_t i) {
    try {
      slots[i] = make(instructions[i]);
    } catch (const Error& e) {
      errors[i] = instructions[i].instr_id + ": " + e.what();
    }
  });

  BuildOutput<Candidate> out;
  out.stats.requested = instructions.size();
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (slots[i]) {
      out.candidates.push_back(std::move(*slots[i]));
    } else {
      spdlog::warn("preference item dropped {}", errors[i]);
      out.stats.drop_reasons.push_back(std::move(errors[i]));
    }
  }
  out.stats.built = out.candidates.size();
  out.stats.dropped = out.stats.requested - out.stats.built;
  std::sort(out.candidates.begin(), out.candidates.end(),
            [](const Candidate& a, const Candidate& b) { return a.instr_id < b.instr_id; });
  return out;
}

}  // namespace

BuildOutput<PreferenceCandidate> build_candidates(std::span<const InstructionRecord> instructions,
                                                  const corpus::ChunkIndex& chunks,
                                                  llm::Gateway& sft_model,
                                                  const CandidateOptions& options) {
  if (options.k < 1) throw PreconditionError("K must be at least 1");
  for (const auto& r : instructions) {
    if (!chunks.find(r.doc_id, r.chunk_index)) {
      throw ReferenceError("instruction " + r.instr_id + " references missing chunk " + r.doc_id +
                           "/" + std::to_string(r.chunk_index));
    }
  }

  return build_all<PreferenceCandidate>(instructions, sft_model, [&](const InstructionRecord& r) {
    const std::string chunk(util::trim(chunks.find(r.doc_id, r.chunk_index)->text));
    const auto with_doc = prompts::reading_comprehension_prompt(r.text, chunk);
    const auto without_doc = prompts::closed_book_prompt(r.text);
    const auto tag = "preference|" + r.instr_id;

    PreferenceCandidate c;
    c.instr_id = r.instr_id;
    c.instruction = r.text;
    c.chunk = chunk;
    c.y_c_star = trimmed(sft_model
                             .generate(llm::GenerationRequest::greedy(with_doc.system, with_doc.user,
                                                                      tag, options.max_tokens))
                             .texts,
                         r.instr_id)
                     .front();
    c.y_c = trimmed(sft_model
                        .generate(llm::GenerationRequest::sample(with_doc.system, with_doc.user, options.k,
                                                                 options.temperature, tag,
                                                                 options.max_tokens))
                        .texts,
                    r.instr_id);
    c.y_r = trimmed(sft_model
                        .generate(llm::GenerationRequest::sample(without_doc.system, without_doc.user,
                                                                 options.k, options.temperature, tag,
                                                                 options.max_tokens))
                        .texts,
                    r.instr_id);
    if (options.greedy_without_context) {
      c.y_r_star = trimmed(sft_model
                               .generate(llm::GenerationRequest::greedy(
                                   without_doc.system, without_doc.user, tag, options.max_tokens))
                               .texts,
                           r.instr_id)
                       .front();
    }
    return c;
  });
}

BuildOutput<AblationCandidate> build_ablation_candidates(std::span<const InstructionRecord> instructions,
                                                         llm::Gateway& sft_model, int k,
                                                         double temperature, int max_tokens) {
  if (k < 2) throw PreconditionError("the ablation needs K >= 2 to pick a preferred and a dispreferred response");
  return build_all<AblationCandidate>(instructions, sft_model, [&](const InstructionRecord& r) {
    const auto prompt = prompts::closed_book_prompt(r.text);
    auto texts = sft_model
                     .generate(llm::GenerationRequest::sample(prompt.system, prompt.user, k, temperature,
                                                              "ablation|" + r.instr_id, max_tokens))
                     .texts;
    return AblationCandidate{r.instr_id, r.text, trimmed(std::move(texts), r.instr_id)};
  });
}

Json to_json(const PreferenceCandidate& c) {
  Json j{{"instr_id", c.instr_id}, {"instruction", c.instruction}, {"chunk", c.chunk},
         {"y_c_star", c.y_c_star}, {"Y_c", c.y_c},                 {"Y_r", c.y_r}};
  if (c.y_r_star) j["y_r_star"] = *c.y_r_star;
  return j;
}

PreferenceCandidate candidate_from_json(const Json& j) {
  PreferenceCandidate c;
  c.instr_id = j.at("instr_id").get<std::string>();
  c.instruction = j.at("instruction").get<std::string>();
  c.chunk = j.value("chunk", std::string{});
  c.y_c_star = j.at("y_c_star").get<std::string>();
  c.y_c = j.at("Y_c").get<std::vector<std::string>>();
  c.y_r = j.at("Y_r").get<std::vector<std::string>>();
  if (j.contains("y_r_star")) c.y_r_star = j.at("y_r_star").get<std::string>();
  if (c.y_c.empty() || c.y_c.size() != c.y_r.size()) {
    throw Error("preference record " + c.instr_id + ": Y_c and Y_r must both hold K >= 1 responses");
  }
  if (c.y_c_star.empty()) throw Error("preference record " + c.instr_id + ": empty y_c_star");
  return c;
}

Json to_json(const AblationCandidate& c) {
  return Json{{"instr_id", c.instr_id}, {"instruction", c.instruction}, {"Y", c.responses}};
}

AblationCandidate ablation_candidate_from_json(const Json& j) {
  return {j.at("instr_id").get<std::string>(), j.at("instruction").get<std::string>(),
          j.at("Y").get<std::vector<std::string>>()};
}

}  // namespace forge::preference
