#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "forge/llm/gateway.hpp"
#include "forge/util/io.hpp"

namespace forge::judge {

/// Verdict of one judging pass, already mapped back to the caller's A/B.
enum class PassVerdict { kA, kB, kTie };
enum class FinalVerdict { kAWins, kBWins, kTie };

std::string_view to_string(PassVerdict v);
std::string_view to_string(FinalVerdict v);
PassVerdict parse_pass_verdict(std::string_view s);
FinalVerdict parse_final_verdict(std::string_view s);

/// A wins only if both passes say A, B only if both say B; anything else
/// is a tie.
FinalVerdict combine(PassVerdict first, PassVerdict second);

/// Reads the verdict token at the end of a judge completion. "A" and "B"
/// are case-sensitive, "tie" is not; surrounding punctuation is ignored.
std::optional<PassVerdict> parse_verdict(std::string_view output);

struct PassResult {
  PassVerdict verdict = PassVerdict::kTie;
  bool parse_failed = false;  // no parseable answer after all retries
  std::string error;          // backend failure, if any
  int attempts = 0;
};

inline constexpr int kParseRetries = 2;

/// One judging pass. With order_swap the responses are presented as
/// (B, A) and the verdict is mapped back. Unparseable output is retried
/// with a stricter prompt; after kParseRetries retries the pass is a
/// flagged tie. `tag` keys the gateway cache.
PassResult judge_pair(std::string_view instruction, std::string_view document, std::string_view response_a,
                      std::string_view response_b, llm::Gateway& judge, bool order_swap,
                      std::string_view tag = {});

struct JudgeItem {
  std::string instr_id;
  std::string instruction;
  std::string document;
  std::string response_a;
  std::string response_b;
};

struct JudgeVerdict {
  std::string instr_id;
  PassVerdict first_pass = PassVerdict::kTie;
  PassVerdict second_pass = PassVerdict::kTie;
  FinalVerdict final_verdict = FinalVerdict::kTie;
  bool flagged = false;  // a pass fell back to tie
  std::vector<std::string> notes;
};

struct WtlSummary {
  std::size_t win = 0;
  std::size_t tie = 0;
  std::size_t lose = 0;

  std::size_t total() const noexcept { return win + tie + lose; }
  double win_rate() const;
  double tie_rate() const;
  double lose_rate() const;
  util::Json to_json() const;
};

WtlSummary summarize(std::span<const JudgeVerdict> verdicts);

struct JudgeRun {
  std::vector<JudgeVerdict> verdicts;  // input order
  WtlSummary summary;
};

/// Two passes per item, the second with the presentation order swapped.
JudgeRun judge_all(std::span<const JudgeItem> items, llm::Gateway& judge);

util::Json to_json(const JudgeVerdict& v);
JudgeVerdict verdict_from_json(const util::Json& j);

/// Counts and rates as a small text table.
std::string summary_table(const WtlSummary& s);

}  // namespace forge::judge
