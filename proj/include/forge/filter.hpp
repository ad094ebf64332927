#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "forge/preference_builder.hpp"
#include "forge/scorer.hpp"
#include "forge/util/io.hpp"

namespace forge::filter {

using preference::AblationCandidate;
using preference::PreferenceCandidate;

struct FilterThresholds {
  double tau_L = 0.5;  // consistency: keep only S_L < tau_L
  double tau_K = 0.5;  // knowledge:   keep only S_K > tau_K

  /// Throws PreconditionError unless both lie in [0, 1].
  void validate() const;
};

/// Mean contradiction of a reference against a list of responses, with the
/// individual scores in response order.
struct SampleScores {
  double mean = 0.0;
  std::vector<double> per_sample;
};

/// S_L: mean of score(y_c_star, y) over y in Y_c.
SampleScores consistency_score(const PreferenceCandidate& cand, const ContradictionScorer& scorer);

/// S_K: mean of score(y_c_star, y) over y in Y_r.
SampleScores knowledge_score(const PreferenceCandidate& cand, const ContradictionScorer& scorer);

/// S_K using only the first k responses of Y_r (1 <= k <= K).
SampleScores knowledge_score_at_k(const PreferenceCandidate& cand, const ContradictionScorer& scorer,
                                  std::size_t k);

/// Index of the largest score; the lowest index wins ties.
std::size_t argmax_first(std::span<const double> scores);

/// y_l: the Y_r response with the highest contradiction against y_c_star.
const std::string& select_rejected(const PreferenceCandidate& cand,
                                   std::span<const double> per_sample_r_scores);

/// K = 1 approximation of S_K from the greedy closed-book response.
/// Requires cand.y_r_star.
double single_greedy_knowledge(const PreferenceCandidate& cand, const ContradictionScorer& scorer);

enum class FilterLabel { kUnknownKept, kKnownExcluded, kInconsistentExcluded };

std::string_view to_string(FilterLabel label);

struct FilteredPreferencePair {
  std::string instr_id;
  std::string instruction;
  std::string y_w;
  std::string y_l;
  double s_l = 0.0;
  double s_k = 0.0;
  FilterLabel label = FilterLabel::kUnknownKept;
};

enum class Outcome {
  kKept,
  kInconsistent,   // S_L >= tau_L
  kKnown,          // S_K <= tau_K
  kUnscored,       // the scorer failed on some pair
  kIdenticalPair,  // would be kept but y_w == y_l
};

std::string_view to_string(Outcome outcome);

/// Scores for one candidate. Knowledge scores are absent when the item
/// failed the consistency test (or was unscored) under the tau_L used.
struct ScoredItem {
  std::optional<SampleScores> consistency;
  std::optional<SampleScores> knowledge;
  std::string error;

  bool unscored() const noexcept { return !consistency.has_value(); }
};

/// Scores every candidate, computing S_K only where S_L < tau_L.
std::vector<ScoredItem> score_candidates(std::span<const PreferenceCandidate> candidates,
                                         const ContradictionScorer& scorer, double tau_L,
                                         std::size_t max_parallel = 1);

struct FilterStats {
  std::size_t kept = 0;
  std::size_t inconsistent_excluded = 0;
  std::size_t known_excluded = 0;
  std::size_t unscored = 0;
  std::size_t identical_dropped = 0;

  std::size_t total() const noexcept {
    return kept + inconsistent_excluded + known_excluded + unscored + identical_dropped;
  }
  util::Json to_json() const;
};

struct ItemDecision {
  std::string instr_id;
  Outcome outcome = Outcome::kUnscored;
  std::optional<double> s_l;
  std::optional<double> s_k;
};

struct FilterResult {
  std::vector<FilteredPreferencePair> d_star;  // ordered by instr_id
  std::vector<ItemDecision> decisions;         // every input, ordered by instr_id
  FilterStats stats;
};

/// Applies the keep rule to precomputed scores. `scored` must come from
/// score_candidates with the same tau_L.
FilterResult apply_thresholds(std::span<const PreferenceCandidate> candidates,
                              std::span<const ScoredItem> scored, const FilterThresholds& thresholds);

/// Consistency then knowledge filtering. An item is kept iff S_L < tau_L
/// and S_K > tau_K (both strict); kept pairs use y_w = y_c_star and y_l from
/// select_rejected. S_K is never computed for items failing the consistency
/// test.
FilterResult filter(std::span<const PreferenceCandidate> candidates, const ContradictionScorer& scorer,
                    const FilterThresholds& thresholds, std::size_t max_parallel = 1);

struct SweepPoint {
  double tau_K = 0.0;
  FilterResult result;

  std::size_t size() const noexcept { return result.d_star.size(); }
};

/// One filter result per tau_K value (which must be ascending), scoring
/// each pair only once.
std::vector<SweepPoint> sweep_tau_K(std::span<const PreferenceCandidate> candidates,
                                    const ContradictionScorer& scorer, double tau_L,
                                    std::span<const double> tau_K_values, std::size_t max_parallel = 1);

struct KnownInstruction {
  std::string instr_id;
  std::string instruction;
};

/// Seeded uniform sample of min(sample_n, available) items that pass the
/// consistency test but fail the knowledge test (S_L < tau_L, S_K <= tau_K),
/// returned in instr_id order.
std::vector<KnownInstruction> extract_known_split(std::span<const PreferenceCandidate> candidates,
                                                  std::span<const ScoredItem> scored,
                                                  const FilterThresholds& thresholds,
                                                  std::size_t sample_n, std::uint64_t seed);
std::vector<KnownInstruction> extract_known_split(std::span<const PreferenceCandidate> candidates,
                                                  const ContradictionScorer& scorer,
                                                  const FilterThresholds& thresholds,
                                                  std::size_t sample_n, std::uint64_t seed);

struct AblationPair {
  std::string instr_id;
  std::string instruction;
  std::string y_w;
  std::string y_l;
  double m_w = 0.0;  // mean contradiction of y_w against the others
  double m_l = 0.0;
};

struct AblationSelection {
  std::optional<AblationPair> pair;
  std::vector<double> mean_contradiction;  // m_i per response
  std::string drop_reason;
};

/// Each response y_i is scored against the others,
/// m_i = mean over j != i of score(y_i, y_j); y_w = argmin m, y_l = argmax m
/// (lowest index on ties). Dropped when argmin == argmax or the two texts
/// are identical. Requires K >= 2.
AblationSelection ablation_select(const AblationCandidate& cand, const ContradictionScorer& scorer);

struct AblationResult {
  std::vector<AblationPair> pairs;
  std::vector<std::string> drop_reasons;
};

AblationResult ablation_filter(std::span<const AblationCandidate> candidates,
                               const ContradictionScorer& scorer, std::size_t max_parallel = 1);

util::Json to_json(const FilteredPreferencePair& p);
FilteredPreferencePair pair_from_json(const util::Json& j);
util::Json to_json(const ItemDecision& d);
util::Json to_json(const AblationPair& p);

}  // namespace forge::filter
