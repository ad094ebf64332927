#include "forge/dpo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace forge::dpo {

ToyPolicy::ToyPolicy(std::size_t vocab_size, std::size_t context_size)
    : vocab_size_(vocab_size), context_size_(context_size) {
  if (vocab_size == 0 || context_size == 0) {
    throw PreconditionError("vocab_size and context_size must be positive");
  }
  logits_.assign(vocab_size * context_size, 0.0);
}

std::size_t ToyPolicy::state_at(const Sequence& x, const Sequence& y, std::size_t t) const {
  std::size_t prev = 0;
  if (t > 0) {
    prev = std::size_t{y[t - 1]} + 1;
  } else if (!x.empty()) {
    prev = std::size_t{x.back()} + 1;
  }
  return prev % context_size_;
}

std::vector<double> ToyPolicy::probabilities(std::size_t state) const {
  const double* row = logits_.data() + state * vocab_size_;
  const double hi = *std::max_element(row, row + vocab_size_);
  std::vector<double> p(vocab_size_);
  double sum = 0.0;
  for (std::size_t v = 0; v < vocab_size_; ++v) {
    p[v] = std::exp(row[v] - hi);
    sum += p[v];
  }
  for (auto& q : p) q /= sum;
  return p;
}

void ToyPolicy::check_tokens(const Sequence& seq) const {
  for (const auto tok : seq) {
    if (tok >= vocab_size_) {
      throw PreconditionError("token " + std::to_string(tok) + " outside vocabulary of size " +
                              std::to_string(vocab_size_));
    }
  }
}

double ToyPolicy::log_prob(const Sequence& x, const Sequence& y) const {
  check_tokens(x);
  check_tokens(y);
  double total = 0.0;
  for (std::size_t t = 0; t < y.size(); ++t) {
    const double* row = logits_.data() + state_at(x, y, t) * vocab_size_;
    const double hi = *std::max_element(row, row + vocab_size_);
    double sum = 0.0;
    for (std::size_t v = 0; v < vocab_size_; ++v) sum += std::exp(row[v] - hi);
    total += row[y[t]] - hi - std::log(sum);
  }
  return total;
}

DpoBatchItem::DpoBatchItem(Sequence x_, Sequence y_w_, Sequence y_l_)
    : x(std::move(x_)), y_w(std::move(y_w_)), y_l(std::move(y_l_)) {
  if (y_w == y_l) throw PreconditionError("chosen and rejected sequences are identical");
}

void DpoConfig::validate() const {
  if (!(beta > 0.0) || !std::isfinite(beta)) throw PreconditionError("beta must be positive");
  if (steps == 0) throw PreconditionError("steps must be positive");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw PreconditionError("learning_rate must be non-negative");
  }
}

double log_ratio(const ToyPolicy& policy, const ToyPolicy& ref, const Sequence& x, const Sequence& y) {
  return policy.log_prob(x, y) - ref.log_prob(x, y);
}

double softplus(double z) {
  return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

namespace {

void check_pair(const ToyPolicy& policy, const ToyPolicy& ref, const std::vector<DpoBatchItem>& batch) {
  if (batch.empty()) throw PreconditionError("DPO batch is empty");
  if (policy.vocab_size() != ref.vocab_size() || policy.context_size() != ref.context_size()) {
    throw PreconditionError("policy and reference shapes differ");
  }
}

double margin_of(const ToyPolicy& policy, const ToyPolicy& ref, const DpoBatchItem& item) {
  return log_ratio(policy, ref, item.x, item.y_w) - log_ratio(policy, ref, item.x, item.y_l);
}

}  // namespace

LossResult dpo_loss(const ToyPolicy& policy, const ToyPolicy& ref, const std::vector<DpoBatchItem>& batch,
                    double beta) {
  check_pair(policy, ref, batch);
  LossResult out;
  out.margins.reserve(batch.size());
  double sum = 0.0;
  for (const auto& item : batch) {
    const double m = margin_of(policy, ref, item);
    out.margins.push_back(m);
    sum += softplus(-beta * m);
  }
  out.loss = sum / static_cast<double>(batch.size());
  return out;
}

std::vector<double> dpo_gradient(const ToyPolicy& policy, const ToyPolicy& ref,
                                 const std::vector<DpoBatchItem>& batch, double beta) {
  check_pair(policy, ref, batch);
  const std::size_t V = policy.vocab_size();
  const std::size_t S = policy.context_size();
  // d log pi(y|x) / d logit[s][v] = sum over positions in state s of
  // [v == y_t] - p_s(v), so weighted token counts per state suffice.
  std::vector<double> counts(S * V, 0.0);
  std::vector<double> totals(S, 0.0);
  const double n = static_cast<double>(batch.size());

  auto accumulate = [&](const Sequence& x, const Sequence& y, double w) {
    for (std::size_t t = 0; t < y.size(); ++t) {
      const auto s = policy.state_at(x, y, t);
      counts[s * V + y[t]] += w;
      totals[s] += w;
    }
  };
  for (const auto& item : batch) {
    const double m = margin_of(policy, ref, item);
    // d softplus(-beta m) / dm = -beta sigmoid(-beta m)
    const double dm = -beta * sigmoid(-beta * m) / n;
    accumulate(item.x, item.y_w, dm);
    accumulate(item.x, item.y_l, -dm);
  }

  std::vector<double> grad(S * V, 0.0);
  for (std::size_t s = 0; s < S; ++s) {
    const auto p = policy.probabilities(s);
    for (std::size_t v = 0; v < V; ++v) grad[s * V + v] = counts[s * V + v] - totals[s] * p[v];
  }
  return grad;
}

double bt_preference_prob(double r_w, double r_l) { return sigmoid(r_w - r_l); }

DivergenceError::DivergenceError(std::size_t step, double loss)
    : Error("DPO training diverged at step " + std::to_string(step) + " (loss " + std::to_string(loss) + ")"),
      step_(step) {}

namespace {

double mean(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

TrainResult train_toy(const ToyPolicy& init, const ToyPolicy& ref, const std::vector<DpoBatchItem>& data,
                      const DpoConfig& config) {
  config.validate();
  check_pair(init, ref, data);
  TrainResult out{init, {}, {}};
  out.mean_margins.reserve(config.steps + 1);
  out.losses.reserve(config.steps + 1);
  for (std::size_t step = 0;; ++step) {
    const auto lr = dpo_loss(out.policy, ref, data, config.beta);
    if (!std::isfinite(lr.loss)) throw DivergenceError(step, lr.loss);
    out.losses.push_back(lr.loss);
    out.mean_margins.push_back(mean(lr.margins));
    if (step == config.steps) break;
    const auto grad = dpo_gradient(out.policy, ref, data, config.beta);
    auto& params = out.policy.parameters();
    for (std::size_t i = 0; i < params.size(); ++i) params[i] -= config.learning_rate * grad[i];
  }
  return out;
}

double implicit_preference_accuracy(const ToyPolicy& policy, const ToyPolicy& ref,
                                    const std::vector<DpoBatchItem>& data, double beta) {
  check_pair(policy, ref, data);
  std::size_t correct = 0;
  for (const auto& item : data) {
    const double r_w = beta * log_ratio(policy, ref, item.x, item.y_w);
    const double r_l = beta * log_ratio(policy, ref, item.x, item.y_l);
    if (bt_preference_prob(r_w, r_l) > 0.5) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

std::vector<double> moving_average(const std::vector<double>& values, std::size_t window) {
  if (window == 0) throw PreconditionError("window must be positive");
  std::vector<double> out;
  out.reserve(values.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    sum += values[i];
    if (i >= window) sum -= values[i - window];
    out.push_back(sum / static_cast<double>(std::min(window, i + 1)));
  }
  return out;
}

void CharVocabulary::observe(std::string_view text) {
  if (frozen_) throw PreconditionError("vocabulary is frozen");
  for (const unsigned char c : text) ids_.emplace(c, 0);
}

void CharVocabulary::freeze() {
  Token next = 0;
  for (auto& [c, id] : ids_) id = next++;
  frozen_ = true;
}

Sequence CharVocabulary::encode(std::string_view text) const {
  if (!frozen_) throw PreconditionError("vocabulary must be frozen before encoding");
  Sequence out;
  out.reserve(text.size());
  for (const unsigned char c : text) {
    const auto it = ids_.find(c);
    if (it == ids_.end()) throw PreconditionError("character outside vocabulary");
    out.push_back(it->second);
  }
  return out;
}

}  // namespace forge::dpo
