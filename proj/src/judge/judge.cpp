#include "forge/judge.hpp"

#include <cctype>

#include <fmt/format.h>

#include "forge/prompts.hpp"
#include "forge/util/error.hpp"
#include "forge/util/parallel.hpp"
#include "forge/util/text.hpp"

namespace forge::judge {

using util::Json;

std::string_view to_string(PassVerdict v) {
  switch (v) {
    case PassVerdict::kA: return "A";
    case PassVerdict::kB: return "B";
    case PassVerdict::kTie: return "tie";
  }
  return "?";
}

std::string_view to_string(FinalVerdict v) {
  switch (v) {
    case FinalVerdict::kAWins: return "A_wins";
    case FinalVerdict::kBWins: return "B_wins";
    case FinalVerdict::kTie: return "tie";
  }
  return "?";
}

PassVerdict parse_pass_verdict(std::string_view s) {
  if (s == "A") return PassVerdict::kA;
  if (s == "B") return PassVerdict::kB;
  if (s == "tie") return PassVerdict::kTie;
  throw PreconditionError("unknown pass verdict '" + std::string(s) + "'");
}

FinalVerdict parse_final_verdict(std::string_view s) {
  if (s == "A_wins") return FinalVerdict::kAWins;
  if (s == "B_wins") return FinalVerdict::kBWins;
  if (s == "tie") return FinalVerdict::kTie;
  throw PreconditionError("unknown final verdict '" + std::string(s) + "'");
}

FinalVerdict combine(PassVerdict first, PassVerdict second) {
  if (first == PassVerdict::kA && second == PassVerdict::kA) return FinalVerdict::kAWins;
  if (first == PassVerdict::kB && second == PassVerdict::kB) return FinalVerdict::kBWins;
  return FinalVerdict::kTie;
}

std::optional<PassVerdict> parse_verdict(std::string_view output) {
  output = util::trim(output);
  const auto space = output.find_last_of(" \t\r\n");
  std::string_view token = space == std::string_view::npos ? output : output.substr(space + 1);
  auto is_punct = [](char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; };
  while (!token.empty() && is_punct(token.front())) token.remove_prefix(1);
  while (!token.empty() && is_punct(token.back())) token.remove_suffix(1);
  if (token == "A") return PassVerdict::kA;
  if (token == "B") return PassVerdict::kB;
  if (util::to_lower(token) == "tie") return PassVerdict::kTie;
  return std::nullopt;
}

namespace {

PassVerdict unswap(PassVerdict v) {
  switch (v) {
    case PassVerdict::kA: return PassVerdict::kB;
    case PassVerdict::kB: return PassVerdict::kA;
    case PassVerdict::kTie: return PassVerdict::kTie;
  }
  return v;
}

}  // namespace

PassResult judge_pair(std::string_view instruction, std::string_view document, std::string_view response_a,
                      std::string_view response_b, llm::Gateway& judge, bool order_swap,
                      std::string_view tag) {
  for (auto text : {instruction, document, response_a, response_b}) {
    if (util::trim(text).empty()) throw PreconditionError("judge inputs must be non-empty");
  }
  const auto first = order_swap ? response_b : response_a;
  const auto second = order_swap ? response_a : response_b;
  PassResult result;
  for (int attempt = 0; attempt <= kParseRetries; ++attempt) {
    const bool strict = attempt > 0;
    const auto prompt = prompts::judge_prompt(instruction, document, first, second, strict);
    auto request = llm::GenerationRequest::greedy(
        prompt.system, prompt.user, fmt::format("judge|{}|{}|{}", tag, order_swap ? "swapped" : "direct", attempt),
        16);
    result.attempts = attempt + 1;
    try {
      const auto out = judge.generate(request);
      if (const auto v = parse_verdict(out.texts.front())) {
        result.verdict = order_swap ? unswap(*v) : *v;
        return result;
      }
    } catch (const ContentError&) {
      // treated like an unparseable answer
    }
  }
  result.verdict = PassVerdict::kTie;
  result.parse_failed = true;
  return result;
}

double WtlSummary::win_rate() const { return total() == 0 ? 0.0 : static_cast<double>(win) / total(); }
double WtlSummary::tie_rate() const { return total() == 0 ? 0.0 : static_cast<double>(tie) / total(); }
double WtlSummary::lose_rate() const { return total() == 0 ? 0.0 : static_cast<double>(lose) / total(); }

Json WtlSummary::to_json() const {
  return Json{{"win", win},           {"tie", tie},           {"lose", lose},
              {"win_rate", win_rate()}, {"tie_rate", tie_rate()}, {"lose_rate", lose_rate()}};
}

WtlSummary summarize(std::span<const JudgeVerdict> verdicts) {
  WtlSummary s;
  for (const auto& v : verdicts) {
    switch (v.final_verdict) {
      case FinalVerdict::kAWins: ++s.win; break;
      case FinalVerdict::kBWins: ++s.lose; break;
      case FinalVerdict::kTie: ++s.tie; break;
    }
  }
  return s;
}

JudgeRun judge_all(std::span<const JudgeItem> items, llm::Gateway& judge) {
  if (items.empty()) throw PreconditionError("nothing to judge");
  JudgeRun run;
  run.verdicts.resize(items.size());
  util::parallel_for(items.size(), judge.max_parallel(), [&](std::size_t i) {
    const auto& item = items[i];
    auto& v = run.verdicts[i];
    v.instr_id = item.instr_id;
    PassVerdict passes[2] = {PassVerdict::kTie, PassVerdict::kTie};
    for (int p = 0; p < 2; ++p) {
      const bool swapped = p == 1;
      try {
        const auto r = judge_pair(item.instruction, item.document, item.response_a, item.response_b, judge,
                                  swapped, item.instr_id);
        passes[p] = r.verdict;
        if (r.parse_failed) {
          v.flagged = true;
          v.notes.push_back(fmt::format("pass {}: unparseable judge output", p + 1));
        }
      } catch (const Error& e) {
        v.flagged = true;
        v.notes.push_back(fmt::format("pass {}: {}", p + 1, e.what()));
      }
    }
    v.first_pass = passes[0];
    v.second_pass = passes[1];
    v.final_verdict = combine(passes[0], passes[1]);
  });
  run.summary = summarize(run.verdicts);
  return run;
}

Json to_json(const JudgeVerdict& v) {
  return Json{{"instr_id", v.instr_id},
              {"first_pass", to_string(v.first_pass)},
              {"second_pass", to_string(v.second_pass)},
              {"final", to_string(v.final_verdict)},
              {"flagged", v.flagged},
              {"notes", v.notes}};
}

JudgeVerdict verdict_from_json(const Json& j) {
  JudgeVerdict v;
  v.instr_id = j.at("instr_id").get<std::string>();
  v.first_pass = parse_pass_verdict(j.at("first_pass").get<std::string>());
  v.second_pass = parse_pass_verdict(j.at("second_pass").get<std::string>());
  v.final_verdict = parse_final_verdict(j.at("final").get<std::string>());
  if (v.final_verdict != combine(v.first_pass, v.second_pass)) {
    throw PreconditionError("verdict for " + v.instr_id + " violates the tie rule");
  }
  v.flagged = j.value("flagged", false);
  if (j.contains("notes")) v.notes = j.at("notes").get<std::vector<std::string>>();
  return v;
}

std::string summary_table(const WtlSummary& s) {
  std::string out = "outcome\tcount\trate\n";
  out += fmt::format("win\t{}\t{:.4f}\n", s.win, s.win_rate());
  out += fmt::format("tie\t{}\t{:.4f}\n", s.tie, s.tie_rate());
  out += fmt::format("lose\t{}\t{:.4f}\n", s.lose, s.lose_rate());
  out += fmt::format("total\t{}\t{:.4f}\n", s.total(), s.total() == 0 ? 0.0 : 1.0);
  return out;
}

}  // namespace forge::judge
