#include "forge/prompts.hpp"

#include <array>

#include "forge/util/text.hpp"

namespace forge::prompts {

namespace {

constexpr std::array<std::string_view, 8> kReservedLabels = {
    "Instruction:", kDocumentLabel, kProposedQuestionLabel, kQuestionLabel,
    kAnswerLabel,   kResponseALabel, kResponseBLabel,       "Verdict:"};

bool starts_with_label(std::string_view line) {
  for (auto label : kReservedLabels) {
    if (line.starts_with(label)) return true;
  }
  return false;
}

template <typename Fn>
std::string map_lines(std::string_view text, Fn&& fn) {
  std::string out;
  out.reserve(text.size() + 8);
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto nl = text.find('\n', start);
    const auto line = text.substr(start, nl == std::string_view::npos ? std::string_view::npos
                                                                        : nl - start);
    fn(out, line);
    if (nl == std::string_view::npos) break;
    out.push_back('\n');
    start = nl + 1;
  }
  return out;
}

}  // namespace

std::string escape_block(std::string_view text) {
  return map_lines(text, [](std::string& out, std::string_view line) {
    if (starts_with_label(line) || (line.starts_with('\\') && starts_with_label(line.substr(1)))) {
      out.push_back('\\');
    }
    out.append(line);
  });
}

std::string unescape_block(std::string_view text) {
  return map_lines(text, [](std::string& out, std::string_view line) {
    if (line.starts_with('\\')) {
      const auto rest = line.substr(1);
      if (starts_with_label(rest) || (rest.starts_with('\\') && starts_with_label(rest.substr(1)))) {
        line = rest;
      }
    }
    out.append(line);
  });
}

PromptPair instruction_prompt(std::string_view chunk_text, std::string_view topic,
                              std::span<const QuestionExample> few_shot) {
  PromptPair p;
  if (!few_shot.empty()) {
    p.system = "Examples of well-formed questions:\n";
    for (const auto& ex : few_shot) {
      p.system += "\nExample document: ";
      p.system += escape_block(util::trim(ex.document));
      p.system += "\nExample question: ";
      p.system += escape_block(util::trim(ex.question));
      p.system += '\n';
    }
  }
  const std::string t(util::collapse_whitespace(topic));
  p.user = "Instruction: Propose a single question regarding the topic of " + t +
           ", whose corresponding answer can be found in the given document.\n"
           "The question must be detailed and objective, whose corresponding answer should be "
           "non-debatable and be found in the given document.\n"
           "The proposed question must not mention the existence of the document, but should "
           "mention the topic, " +
           t + ".\n";
  p.user += kDocumentLabel;
  p.user += ' ';
  p.user += escape_block(util::trim(chunk_text));
  p.user += '\n';
  p.user += kProposedQuestionLabel;
  return p;
}

std::string context_block(std::string_view document) {
  std::string block =
      "Read the document provided and use the relevant information to answer the question "
      "carefully.\n"
      "It is important that you must not explicitly mention the document's existence, while "
      "ensuring that your response is factual and relevant according to the document.\n"
      "Ensure your answer is well-structured according to the question.\n";
  block += kDocumentLabel;
  block += ' ';
  block += escape_block(util::trim(document));
  block += '\n';
  return block;
}

std::string question_prompt(std::string_view instruction) {
  std::string out(kQuestionLabel);
  out += ' ';
  out += escape_block(util::trim(instruction));
  out += '\n';
  out += kAnswerLabel;
  return out;
}

PromptPair reading_comprehension_prompt(std::string_view instruction, std::string_view document) {
  return {"", context_block(document) + question_prompt(instruction)};
}

PromptPair closed_book_prompt(std::string_view instruction) {
  return {"", question_prompt(instruction)};
}

PromptPair self_annotation_prompt(std::string_view instruction,
                                  std::span<const AnswerExample> few_shot) {
  PromptPair p;
  p.system = "Answer each question accurately and concisely.\n";
  for (const auto& ex : few_shot) {
    p.system += "\nExample question: ";
    p.system += escape_block(util::trim(ex.question));
    p.system += "\nExample answer: ";
    p.system += escape_block(util::trim(ex.answer));
    p.system += '\n';
  }
  p.user = question_prompt(instruction);
  return p;
}

PromptPair judge_prompt(std::string_view instruction, std::string_view document,
                        std::string_view response_a, std::string_view response_b, bool strict) {
  PromptPair p;
  p.system =
      "You are an impartial judge. Decide which of two answers to a question is more "
      "factually accurate given the document. Ignore style and length.";
  p.user.append(kDocumentLabel).append(" ").append(escape_block(util::trim(document))).append("\n");
  p.user.append(kQuestionLabel).append(" ").append(escape_block(util::trim(instruction))).append("\n");
  p.user.append(kResponseALabel).append(" ").append(escape_block(util::trim(response_a))).append("\n");
  p.user.append(kResponseBLabel).append(" ").append(escape_block(util::trim(response_b))).append("\n");
  p.user +=
      "Which response is more accurate according to the document? Answer with exactly one "
      "token: A, B, or tie.";
  if (strict) {
    p.user +=
        "\nYour previous answer could not be parsed. Reply with a single token and nothing "
        "else: A, B, or tie.";
  }
  return p;
}

std::string extract_field(std::string_view prompt, std::string_view label) {
  std::size_t pos = std::string_view::npos;
  if (prompt.starts_with(label)) {
    pos = 0;
  } else {
    std::string needle = "\n";
    needle += label;
    const auto hit = prompt.find(needle);
    if (hit != std::string_view::npos) pos = hit + 1;
  }
  if (pos == std::string_view::npos) return {};
  pos += label.size();
  if (pos < prompt.size() && prompt[pos] == ' ') ++pos;

  std::size_t end = pos;
  while (end < prompt.size()) {
    const auto nl = prompt.find('\n', end);
    if (nl == std::string_view::npos) {
      end = prompt.size();
      break;
    }
    const auto next = prompt.substr(nl + 1);
    bool label_line = false;
    for (auto l : kReservedLabels) label_line = label_line || next.starts_with(l);
    if (label_line || next.starts_with("Which response") || next.starts_with("Your previous")) {
      end = nl;
      break;
    }
    end = nl + 1;
  }
  return unescape_block(prompt.substr(pos, end - pos));
}

}  // namespace forge::prompts
