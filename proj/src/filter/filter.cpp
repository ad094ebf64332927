#include "forge/filter.hpp"

#include <algorithm>
#include <numeric>

#include "forge/util/error.hpp"
#include "forge/util/parallel.hpp"
#include "forge/util/rng.hpp"

namespace forge::filter {

using util::Json;

void FilterThresholds::validate() const {
  if (!(tau_L >= 0.0 && tau_L <= 1.0)) throw PreconditionError("tau_L must lie in [0, 1]");
  if (!(tau_K >= 0.0 && tau_K <= 1.0)) throw PreconditionError("tau_K must lie in [0, 1]");
}

namespace {

SampleScores mean_against(const std::string& reference, std::span<const std::string> responses,
                          const ContradictionScorer& scorer) {
  if (responses.empty()) throw PreconditionError("K must be at least 1");
  SampleScores s;
  s.per_sample.reserve(responses.size());
  double sum = 0.0;
  for (const auto& r : responses) {
    const double v = scorer.score(reference, r);
    if (!(v >= 0.0 && v <= 1.0)) {
      throw ScorerError("scorer '" + scorer.scorer_id() + "' returned " + std::to_string(v));
    }
    s.per_sample.push_back(v);
    sum += v;
  }
  s.mean = sum / static_cast<double>(responses.size());
  return s;
}

template <typename T>
std::vector<std::size_t> order_by_id(std::span<const T> items) {
  std::vector<std::size_t> order(items.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return items[a].instr_id < items[b].instr_id; });
  return order;
}

}  // namespace

SampleScores consistency_score(const PreferenceCandidate& cand, const ContradictionScorer& scorer) {
  return mean_against(cand.y_c_star, cand.y_c, scorer);
}

SampleScores knowledge_score(const PreferenceCandidate& cand, const ContradictionScorer& scorer) {
  return mean_against(cand.y_c_star, cand.y_r, scorer);
}

SampleScores knowledge_score_at_k(const PreferenceCandidate& cand, const ContradictionScorer& scorer,
                                  std::size_t k) {
  if (k < 1 || k > cand.y_r.size()) {
    throw PreconditionError("k must lie in [1, " + std::to_string(cand.y_r.size()) + "]");
  }
  return mean_against(cand.y_c_star, std::span(cand.y_r).first(k), scorer);
}

std::size_t argmax_first(std::span<const double> scores) {
  if (scores.empty()) throw PreconditionError("argmax of an empty score list");
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (scores[i] > scores[best]) best = i;
  }
  return best;
}

const std::string& select_rejected(const PreferenceCandidate& cand,
                                   std::span<const double> per_sample_r_scores) {
  if (per_sample_r_scores.size() != cand.y_r.size()) {
    throw PreconditionError("need one score per rejected sample");
  }
  return cand.y_r[argmax_first(per_sample_r_scores)];
}

double single_greedy_knowledge(const PreferenceCandidate& cand, const ContradictionScorer& scorer) {
  if (!cand.y_r_star) {
    throw PreconditionError("candidate " + cand.instr_id + " has no greedy closed-book response");
  }
  return scorer.score(cand.y_c_star, *cand.y_r_star);
}

std::string_view to_string(FilterLabel label) {
  switch (label) {
    case FilterLabel::kUnknownKept: return "unknown_kept";
    case FilterLabel::kKnownExcluded: return "known_excluded";
    case FilterLabel::kInconsistentExcluded: return "inconsistent_excluded";
  }
  return "?";
}

std::string_view to_string(Outcome outcome) {
  switch (outcome) {
    case Outcome::kKept: return "kept";
    case Outcome::kInconsistent: return "inconsistent_excluded";
    case Outcome::kKnown: return "known_excluded";
    case Outcome::kUnscored: return "unscored";
    case Outcome::kIdenticalPair: return "identical_pair_dropped";
  }
  return "?";
}

std::vector<ScoredItem> score_candidates(std::span<const PreferenceCandidate> candidates,
                                         const ContradictionScorer& scorer, double tau_L,
                                         std::size_t max_parallel) {
  std::vector<ScoredItem> scored(candidates.size());
  util::parallel_for(candidates.size(), max_parallel, [&](std::size_t i) {
    auto& item = scored[i];
    try {
      item.consistency = consistency_score(candidates[i], scorer);
      if (item.consistency->mean < tau_L) item.knowledge = knowledge_score(candidates[i], scorer);
    } catch (const ScorerError& e) {
      item.consistency.reset();
      item.knowledge.reset();
      item.error = e.what();
    }
  });
  return scored;
}

Json FilterStats::to_json() const {
  return Json{{"kept", kept},
              {"inconsistent_excluded", inconsistent_excluded},
              {"known_excluded", known_excluded},
              {"unscored", unscored},
              {"identical_pair_dropped", identical_dropped},
              {"total", total()}};
}

FilterResult apply_thresholds(std::span<const PreferenceCandidate> candidates,
                              std::span<const ScoredItem> scored, const FilterThresholds& thresholds) {
  thresholds.validate();
  if (scored.size() != candidates.size()) throw PreconditionError("one score record per candidate");

  FilterResult result;
  for (const auto i : order_by_id(candidates)) {
    const auto& cand = candidates[i];
    const auto& item = scored[i];
    ItemDecision d{cand.instr_id, Outcome::kUnscored, std::nullopt, std::nullopt};
    if (item.unscored()) {
      ++result.stats.unscored;
    } else {
      d.s_l = item.consistency->mean;
      if (!(*d.s_l < thresholds.tau_L)) {
        d.outcome = Outcome::kInconsistent;
        ++result.stats.inconsistent_excluded;
      } else {
        if (!item.knowledge) {
          throw PreconditionError("scores for " + cand.instr_id + " were computed with a lower tau_L");
        }
        d.s_k = item.knowledge->mean;
        if (!(*d.s_k > thresholds.tau_K)) {
          d.outcome = Outcome::kKnown;
          ++result.stats.known_excluded;
        } else {
          const auto& y_l = select_rejected(cand, item.knowledge->per_sample);
          if (y_l == cand.y_c_star) {
            d.outcome = Outcome::kIdenticalPair;
            ++result.stats.identical_dropped;
          } else {
            d.outcome = Outcome::kKept;
            ++result.stats.kept;
            result.d_star.push_back({cand.instr_id, cand.instruction, cand.y_c_star, y_l, *d.s_l,
                                     *d.s_k, FilterLabel::kUnknownKept});
          }
        }
      }
    }
    result.decisions.push_back(std::move(d));
  }
  return result;
}

FilterResult filter(std::span<const PreferenceCandidate> candidates, const ContradictionScorer& scorer,
                    const FilterThresholds& thresholds, std::size_t max_parallel) {
  thresholds.validate();
  const auto scored = score_candidates(candidates, scorer, thresholds.tau_L, max_parallel);
  return apply_thresholds(candidates, scored, thresholds);
}

std::vector<SweepPoint> sweep_tau_K(std::span<const PreferenceCandidate> candidates,
                                    const ContradictionScorer& scorer, double tau_L,
                                    std::span<const double> tau_K_values, std::size_t max_parallel) {
  if (!std::is_sorted(tau_K_values.begin(), tau_K_values.end())) {
    throw PreconditionError("tau_K sweep values must be ascending");
  }
  FilterThresholds{tau_L, 0.0}.validate();
  const auto scored = score_candidates(candidates, scorer, tau_L, max_parallel);
  std::vector<SweepPoint> points;
  for (const double tau_K : tau_K_values) {
    points.push_back({tau_K, apply_thresholds(candidates, scored, {tau_L, tau_K})});
  }
  return points;
}

std::vector<KnownInstruction> extract_known_split(std::span<const PreferenceCandidate> candidates,
                                                  std::span<const ScoredItem> scored,
                                                  const FilterThresholds& thresholds,
                                                  std::size_t sample_n, std::uint64_t seed) {
  thresholds.validate();
  if (scored.size() != candidates.size()) throw PreconditionError("one score record per candidate");
  std::vector<KnownInstruction> known;
  for (const auto i : order_by_id(candidates)) {
    const auto& item = scored[i];
    if (item.unscored() || !(item.consistency->mean < thresholds.tau_L)) continue;
    if (!item.knowledge) {
      throw PreconditionError("scores for " + candidates[i].instr_id + " were computed with a lower tau_L");
    }
    if (item.knowledge->mean <= thresholds.tau_K) {
      known.push_back({candidates[i].instr_id, candidates[i].instruction});
    }
  }
  util::DeterministicRng rng(seed);
  std::vector<KnownInstruction> sample;
  for (const auto idx : rng.sample_indices(known.size(), sample_n)) sample.push_back(known[idx]);
  return sample;
}

std::vector<KnownInstruction> extract_known_split(std::span<const PreferenceCandidate> candidates,
                                                  const ContradictionScorer& scorer,
                                                  const FilterThresholds& thresholds,
                                                  std::size_t sample_n, std::uint64_t seed) {
  thresholds.validate();
  const auto scored = score_candidates(candidates, scorer, thresholds.tau_L);
  return extract_known_split(candidates, scored, thresholds, sample_n, seed);
}

AblationSelection ablation_select(const AblationCandidate& cand, const ContradictionScorer& scorer) {
  const auto k = cand.responses.size();
  if (k < 2) throw PreconditionError("ablation selection needs at least two responses");
  AblationSelection sel;
  sel.mean_contradiction.resize(k);
  for (std::size_t i = 0; i < k; ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      if (j != i) sum += scorer.score(cand.responses[i], cand.responses[j]);
    }
    sel.mean_contradiction[i] = sum / static_cast<double>(k - 1);
  }
  const auto& m = sel.mean_contradiction;
  std::size_t lo = 0;
  for (std::size_t i = 1; i < k; ++i) {
    if (m[i] < m[lo]) lo = i;
  }
  const std::size_t hi = argmax_first(m);
  if (lo == hi) {
    sel.drop_reason = cand.instr_id + ": all responses equally consistent";
  } else if (cand.responses[lo] == cand.responses[hi]) {
    sel.drop_reason = cand.instr_id + ": preferred and dispreferred responses are identical";
  } else {
    sel.pair = AblationPair{cand.instr_id, cand.instruction, cand.responses[lo], cand.responses[hi],
                            m[lo], m[hi]};
  }
  return sel;
}

AblationResult ablation_filter(std::span<const AblationCandidate> candidates,
                               const ContradictionScorer& scorer, std::size_t max_parallel) {
  std::vector<AblationSelection> selections(candidates.size());
  util::parallel_for(candidates.size(), max_parallel, [&](std::size_t i) {
    try {
      selections[i] = ablation_select(candidates[i], scorer);
    } catch (const ScorerError& e) {
      selections[i].drop_reason = candidates[i].instr_id + ": unscored (" + e.what() + ")";
    }
  });
  AblationResult result;
  for (const auto i : order_by_id(candidates)) {
    if (selections[i].pair) {
      result.pairs.push_back(std::move(*selections[i].pair));
    } else {
      result.drop_reasons.push_back(std::move(selections[i].drop_reason));
    }
  }
  return result;
}

Json to_json(const FilteredPreferencePair& p) {
  return Json{{"instr_id", p.instr_id}, {"instruction", p.instruction}, {"y_w", p.y_w},
              {"y_l", p.y_l},           {"S_L", p.s_l},                 {"S_K", p.s_k}};
}

FilteredPreferencePair pair_from_json(const Json& j) {
  FilteredPreferencePair p{j.at("instr_id").get<std::string>(), j.at("instruction").get<std::string>(),
                           j.at("y_w").get<std::string>(),      j.at("y_l").get<std::string>(),
                           j.value("S_L", 0.0),                 j.value("S_K", 0.0),
                           FilterLabel::kUnknownKept};
  return p;
}

Json to_json(const ItemDecision& d) {
  Json j{{"instr_id", d.instr_id}, {"outcome", to_string(d.outcome)}};
  j["S_L"] = d.s_l ? Json(*d.s_l) : Json(nullptr);
  j["S_K"] = d.s_k ? Json(*d.s_k) : Json(nullptr);
  return j;
}

Json to_json(const AblationPair& p) {
  return Json{{"instr_id", p.instr_id}, {"instruction", p.instruction}, {"y_w", p.y_w},
              {"y_l", p.y_l},           {"m_w", p.m_w},                 {"m_l", p.m_l}};
}

}  // namespace forge::filter
