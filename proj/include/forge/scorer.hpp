#pragma once

#include <chrono>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>

#include "forge/llm/http_json.hpp"

namespace forge::filter {

/// Probability that `hypothesis` contradicts `premise`, in [0, 1].
/// Implementations must be thread-safe and deterministic within a run.
/// Failures are reported as ScorerError.
class ContradictionScorer {
 public:
  virtual ~ContradictionScorer() = default;
  virtual double score(std::string_view premise, std::string_view hypothesis) const = 0;
  virtual std::string scorer_id() const = 0;
};

/// 1 - Jaccard similarity of the lowercased word sets. Symmetric; two texts
/// with identical word sets score 0.
class LexicalScorer final : public ContradictionScorer {
 public:
  double score(std::string_view premise, std::string_view hypothesis) const override;
  std::string scorer_id() const override { return "lexical-jaccard"; }
};

/// Table-driven scorer for tests and fixtures. Pairs missing from the table
/// get `fallback` or, without one, raise ScorerError.
class ScriptedScorer final : public ContradictionScorer {
 public:
  using Table = std::map<std::pair<std::string, std::string>, double>;

  explicit ScriptedScorer(Table table, std::optional<double> fallback = std::nullopt,
                          std::string id = "scripted");

  double score(std::string_view premise, std::string_view hypothesis) const override;
  std::string scorer_id() const override { return id_; }

 private:
  Table table_;
  std::optional<double> fallback_;
  std::string id_;
};

struct NliServiceOptions {
  std::string base_url;
  std::string model = "microsoft/deberta-v3-large-mnli";
  int max_attempts = 5;
  std::chrono::seconds timeout{60};
};

/// Client for an NLI scoring service:
///   POST {base_url}/contradiction
///   {"model": "...", "premise": "...", "hypothesis": "..."}
///   -> {"contradiction": 0.87}
/// Any reply outside [0, 1] or failing after retries raises ScorerError.
class NliServiceScorer final : public ContradictionScorer {
 public:
  explicit NliServiceScorer(NliServiceOptions options);

  double score(std::string_view premise, std::string_view hypothesis) const override;
  std::string scorer_id() const override;

 private:
  NliServiceOptions options_;
  llm::HttpEndpoint endpoint_;
};

/// Scores each sentence of the hypothesis against the premise and reports
/// the maximum.
class SentenceMaxScorer final : public ContradictionScorer {
 public:
  explicit SentenceMaxScorer(std::shared_ptr<const ContradictionScorer> inner);

  double score(std::string_view premise, std::string_view hypothesis) const override;
  std::string scorer_id() const override;

 private:
  std::shared_ptr<const ContradictionScorer> inner_;
};

/// Memoises an inner scorer per (scorer_id, sha256(premise), sha256(hypothesis)).
class CachingScorer final : public ContradictionScorer {
 public:
  explicit CachingScorer(std::shared_ptr<const ContradictionScorer> inner);

  double score(std::string_view premise, std::string_view hypothesis) const override;
  std::string scorer_id() const override { return inner_->scorer_id(); }

  std::size_t inner_calls() const;

 private:
  std::shared_ptr<const ContradictionScorer> inner_;
  mutable std::mutex mutex_;
  mutable std::unordered_map<std::string, double> memo_;
  mutable std::size_t inner_calls_ = 0;
};

/// Counts calls to an inner scorer; used to observe short-circuiting.
class CountingScorer final : public ContradictionScorer {
 public:
  explicit CountingScorer(const ContradictionScorer& inner) : inner_(inner) {}

  double score(std::string_view premise, std::string_view hypothesis) const override {
    std::lock_guard lock(mutex_);
    ++calls_;
    return inner_.score(premise, hypothesis);
  }
  std::string scorer_id() const override { return inner_.scorer_id(); }
  std::size_t calls() const {
    std::lock_guard lock(mutex_);
    return calls_;
  }

 private:
  const ContradictionScorer& inner_;
  mutable std::mutex mutex_;
  mutable std::size_t calls_ = 0;
};

}  // namespace forge::filter
