#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

// Prompt templates shared by the data-generation stages. Each prompt is a
// (system, user) pair. Caller-provided text is inserted in a single pass, so
// placeholder-looking text inside a document is never expanded, and any line
// of inserted text that starts with one of the template's field labels is
// escaped with a leading backslash so the field structure stays unambiguous.

namespace forge::prompts {

struct PromptPair {
  std::string system;
  std::string user;
};

/// Few-shot example for instruction generation.
struct QuestionExample {
  std::string document;
  std::string question;
};

/// Few-shot example for answering without reference material.
struct AnswerExample {
  std::string question;
  std::string answer;
};

inline constexpr std::string_view kDocumentLabel = "Document:";
inline constexpr std::string_view kProposedQuestionLabel = "Proposed question:";
inline constexpr std::string_view kQuestionLabel = "Question:";
inline constexpr std::string_view kAnswerLabel = "Answer:";
inline constexpr std::string_view kResponseALabel = "Response A:";
inline constexpr std::string_view kResponseBLabel = "Response B:";

/// Escapes template field labels at the start of any line of `text`.
std::string escape_block(std::string_view text);
/// Inverse of escape_block.
std::string unescape_block(std::string_view text);

PromptPair instruction_prompt(std::string_view chunk_text, std::string_view topic,
                              std::span<const QuestionExample> few_shot);

/// Reading-comprehension preamble plus the document field. Prepending this
/// block to question_prompt() yields the full reading-comprehension prompt.
std::string context_block(std::string_view document);

/// "Question: ...\nAnswer:".
std::string question_prompt(std::string_view instruction);

/// Reading-comprehension prompt: instruction answered from a document.
PromptPair reading_comprehension_prompt(std::string_view instruction, std::string_view document);

/// Plain question prompt with no reference material and no examples.
PromptPair closed_book_prompt(std::string_view instruction);

/// Closed-book prompt with answer examples in the system message.
PromptPair self_annotation_prompt(std::string_view instruction,
                                  std::span<const AnswerExample> few_shot);

/// Pairwise truthfulness comparison. `strict` appends a reminder used when a
/// previous answer could not be parsed.
PromptPair judge_prompt(std::string_view instruction, std::string_view document,
                        std::string_view response_a, std::string_view response_b, bool strict);

/// Extracts the raw value of a single-line or multi-line field that starts
/// with `label` and runs until the next known label line. Returns an empty
/// string when the label is absent. Used by the mock backend and tests.
std::string extract_field(std::string_view prompt, std::string_view label);

}  // namespace forge::prompts
