#include "forge/scorer.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <thread>

#include "forge/util/error.hpp"
#include "forge/util/hash.hpp"
#include "forge/util/text.hpp"

namespace forge::filter {

using util::Json;

double LexicalScorer::score(std::string_view premise, std::string_view hypothesis) const {
  const auto a = util::word_tokens(premise);
  const auto b = util::word_tokens(hypothesis);
  const std::set<std::string> sa(a.begin(), a.end());
  const std::set<std::string> sb(b.begin(), b.end());
  if (sa.empty() && sb.empty()) return 0.0;
  std::size_t inter = 0;
  for (const auto& w : sa) inter += sb.count(w);
  const double similarity =
      static_cast<double>(inter) / static_cast<double>(sa.size() + sb.size() - inter);
  return std::clamp(1.0 - similarity, 0.0, 1.0);
}

ScriptedScorer::ScriptedScorer(Table table, std::optional<double> fallback, std::string id)
    : table_(std::move(table)), fallback_(fallback), id_(std::move(id)) {
  for (const auto& [pair, value] : table_) {
    if (!(value >= 0.0 && value <= 1.0)) throw PreconditionError("scripted score outside [0, 1]");
  }
}

double ScriptedScorer::score(std::string_view premise, std::string_view hypothesis) const {
  const auto it = table_.find({std::string(premise), std::string(hypothesis)});
  if (it != table_.end()) return it->second;
  if (fallback_) return *fallback_;
  throw ScorerError("no scripted score for pair (" + std::string(premise.substr(0, 40)) + ", " +
                    std::string(hypothesis.substr(0, 40)) + ")");
}

NliServiceScorer::NliServiceScorer(NliServiceOptions options)
    : options_(std::move(options)), endpoint_(llm::parse_base_url(options_.base_url)) {}

std::string NliServiceScorer::scorer_id() const {
  return "nli:" + options_.model + "@" + options_.base_url;
}

double NliServiceScorer::score(std::string_view premise, std::string_view hypothesis) const {
  const Json body{{"model", options_.model}, {"premise", premise}, {"hypothesis", hypothesis}};
  for (int attempt = 1;; ++attempt) {
    try {
      const auto reply = llm::post_json(endpoint_, "/contradiction", body, {}, options_.timeout);
      const auto it = reply.find("contradiction");
      if (it == reply.end() || !it->is_number()) {
        throw ScorerError("NLI reply lacks a numeric 'contradiction' field: " + reply.dump());
      }
      const double value = it->get<double>();
      if (!(value >= 0.0 && value <= 1.0)) {
        throw ScorerError("NLI contradiction score " + std::to_string(value) + " outside [0, 1]");
      }
      return value;
    } catch (const RetriableError& e) {
      if (attempt >= options_.max_attempts) throw ScorerError(e.what());
      std::this_thread::sleep_for(std::chrono::milliseconds(100) * (1 << std::min(attempt, 6)));
    } catch (const ContentError& e) {
      throw ScorerError(std::string(e.what()) + ": " + e.raw_response());
    }
  }
}

SentenceMaxScorer::SentenceMaxScorer(std::shared_ptr<const ContradictionScorer> inner)
    : inner_(std::move(inner)) {}

std::string SentenceMaxScorer::scorer_id() const { return inner_->scorer_id() + "+sentence-max"; }

double SentenceMaxScorer::score(std::string_view premise, std::string_view hypothesis) const {
  const auto sentences = util::split_sentences(hypothesis);
  if (sentences.empty()) return inner_->score(premise, hypothesis);
  double best = 0.0;
  for (const auto& s : sentences) best = std::max(best, inner_->score(premise, s));
  return best;
}

CachingScorer::CachingScorer(std::shared_ptr<const ContradictionScorer> inner)
    : inner_(std::move(inner)) {}

double CachingScorer::score(std::string_view premise, std::string_view hypothesis) const {
  const auto key = inner_->scorer_id() + '|' + util::sha256_hex(premise) + '|' +
                   util::sha256_hex(hypothesis);
  {
    std::lock_guard lock(mutex_);
    if (auto it = memo_.find(key); it != memo_.end()) return it->second;
  }
  const double value = inner_->score(premise, hypothesis);
  std::lock_guard lock(mutex_);
  ++inner_calls_;
  return memo_.try_emplace(key, value).first->second;
}

std::size_t CachingScorer::inner_calls() const {
  std::lock_guard lock(mutex_);
  return inner_calls_;
}

}  // namespace forge::filter
