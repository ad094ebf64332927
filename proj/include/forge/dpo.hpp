#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "forge/util/error.hpp"

namespace forge::dpo {

using Token = std::uint32_t;
using Sequence = std::vector<Token>;

/// Tabular autoregressive policy. The state of position t is derived from
/// the previous token (the last prompt token for t = 0), so a sequence's
/// log-probability is a sum of per-state log-softmax entries.
class ToyPolicy {
 public:
  ToyPolicy(std::size_t vocab_size, std::size_t context_size);

  std::size_t vocab_size() const noexcept { return vocab_size_; }
  std::size_t context_size() const noexcept { return context_size_; }
  std::size_t parameter_count() const noexcept { return logits_.size(); }

  double& logit(std::size_t state, Token token) { return logits_[state * vocab_size_ + token]; }
  double logit(std::size_t state, Token token) const { return logits_[state * vocab_size_ + token]; }
  std::vector<double>& parameters() noexcept { return logits_; }
  const std::vector<double>& parameters() const noexcept { return logits_; }

  /// State used to predict y[t] after prompt x.
  std::size_t state_at(const Sequence& x, const Sequence& y, std::size_t t) const;

  /// Softmax of one state's logits.
  std::vector<double> probabilities(std::size_t state) const;

  /// log pi(y | x), length-unnormalized. Throws PreconditionError on an
  /// out-of-vocabulary token.
  double log_prob(const Sequence& x, const Sequence& y) const;

  /// Throws PreconditionError if any token is outside the vocabulary.
  void check_tokens(const Sequence& seq) const;

 private:
  std::size_t vocab_size_;
  std::size_t context_size_;
  std::vector<double> logits_;
};

struct DpoBatchItem {
  DpoBatchItem(Sequence x, Sequence y_w, Sequence y_l);

  Sequence x;
  Sequence y_w;
  Sequence y_l;
};

struct DpoConfig {
  double beta = 0.3;
  std::size_t steps = 300;
  double learning_rate = 1.0;

  void validate() const;
};

/// log pi(y|x) - log pi_ref(y|x).
double log_ratio(const ToyPolicy& policy, const ToyPolicy& ref, const Sequence& x, const Sequence& y);

/// log(1 + e^z) without overflow.
double softplus(double z);
double sigmoid(double z);

struct LossResult {
  double loss = 0.0;
  std::vector<double> margins;  // delta_chosen - delta_rejected per item
};

/// Mean over items of -log sigmoid(beta * margin).
LossResult dpo_loss(const ToyPolicy& policy, const ToyPolicy& ref, const std::vector<DpoBatchItem>& batch,
                    double beta);

/// Gradient of dpo_loss with respect to every policy logit, laid out like
/// ToyPolicy::parameters().
std::vector<double> dpo_gradient(const ToyPolicy& policy, const ToyPolicy& ref,
                                 const std::vector<DpoBatchItem>& batch, double beta);

/// p(chosen preferred over rejected) = sigmoid(r_w - r_l).
double bt_preference_prob(double r_w, double r_l);

/// Raised when the training loss becomes non-finite.
class DivergenceError : public Error {
 public:
  DivergenceError(std::size_t step, double loss);
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

struct TrainResult {
  ToyPolicy policy;
  std::vector<double> mean_margins;  // steps + 1 entries, before each update and after the last
  std::vector<double> losses;        // same layout
};

/// Full-batch gradient descent on the DPO loss.
TrainResult train_toy(const ToyPolicy& init, const ToyPolicy& ref, const std::vector<DpoBatchItem>& data,
                      const DpoConfig& config);

/// Fraction of items whose implicit reward beta * delta prefers y_w.
double implicit_preference_accuracy(const ToyPolicy& policy, const ToyPolicy& ref,
                                    const std::vector<DpoBatchItem>& data, double beta);

/// Trailing moving average with the given window.
std::vector<double> moving_average(const std::vector<double>& values, std::size_t window);

/// Byte-level vocabulary built from the texts it has seen, ids in byte order.
class CharVocabulary {
 public:
  void observe(std::string_view text);
  void freeze();

  std::size_t size() const noexcept { return ids_.size(); }
  Sequence encode(std::string_view text) const;

 private:
  std::map<unsigned char, Token> ids_;
  bool frozen_ = false;
};

}  // namespace forge::dpo
