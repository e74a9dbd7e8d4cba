#pragma once

#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "specdec/distribution.hpp"
#include "specdec/error.hpp"
#include "specdec/vocabulary.hpp"

namespace specdec {

/// Anything that maps a context to a next-token distribution.
///
/// Implementations must be pure functions of (parameters, context) and safe
/// to call concurrently. Callers go through next_distribution(), which checks
/// the context before dispatching to compute().
class LanguageModel {
 public:
  explicit LanguageModel(std::shared_ptr<const Vocabulary> vocab) : vocab_(std::move(vocab)) {
    if (!vocab_) throw InputError("language model needs a vocabulary");
  }
  virtual ~LanguageModel() = default;

  LanguageModel(const LanguageModel&) = delete;
  LanguageModel& operator=(const LanguageModel&) = delete;

  const Vocabulary& vocabulary() const noexcept { return *vocab_; }
  const std::shared_ptr<const Vocabulary>& vocabulary_ptr() const noexcept { return vocab_; }

  Distribution next_distribution(std::span<const TokenId> ctx) const {
    if (ctx.empty()) throw InputError("next_distribution: empty context");
    check_token_range(*vocab_, ctx);
    if (ctx.back() == vocab_->eos_id()) throw InputError("next_distribution: context already ends in eos");
    Distribution d = compute(ctx);
#ifdef SPECDEC_CHECK_DISTRIBUTIONS
    // Re-run the invariant checks on whatever compute() produced.
    d = Distribution(std::vector<double>(d.probs().begin(), d.probs().end()));
    if (d.size() != vocab_->size()) throw InputError("model returned distribution of wrong length");
#endif
    return d;
  }

  Distribution next_distribution(const Context& ctx) const { return next_distribution(ctx.tokens()); }

 protected:
  /// `ctx` is non-empty, in range, and does not end in eos.
  virtual Distribution compute(std::span<const TokenId> ctx) const = 0;

 private:
  std::shared_ptr<const Vocabulary> vocab_;
};

using ModelPtr = std::shared_ptr<const LanguageModel>;

/// Always predicts the same token with probability 1.
class ConstantModel final : public LanguageModel {
 public:
  ConstantModel(std::shared_ptr<const Vocabulary> vocab, TokenId token)
      : LanguageModel(std::move(vocab)), token_(token) {
    if (!vocabulary().contains(token_)) throw InputError("ConstantModel: token out of range");
  }

 protected:
  Distribution compute(std::span<const TokenId>) const override {
    return Distribution::one_hot(vocabulary().size(), token_);
  }

 private:
  TokenId token_;
};

/// Convex blend `(1 - lambda) * base + lambda * anchor`, row by row.
///
/// lambda = 0 reproduces `base` and lambda = 1 reproduces `anchor`, both
/// bit-exactly.
class InterpolatedModel final : public LanguageModel {
 public:
  InterpolatedModel(ModelPtr anchor, ModelPtr base, double lambda)
      : LanguageModel(require(anchor).vocabulary_ptr()),
        anchor_(std::move(anchor)),
        base_(std::move(base)),
        lambda_(lambda) {
    if (!base_) throw InputError("InterpolatedModel: null base model");
    if (!(lambda_ >= 0.0 && lambda_ <= 1.0)) throw InputError("lambda must lie in [0, 1]");
    if (!(anchor_->vocabulary() == base_->vocabulary()))
      throw InputError("InterpolatedModel: models do not share a vocabulary");
  }

  double lambda() const noexcept { return lambda_; }

 protected:
  Distribution compute(std::span<const TokenId> ctx) const override {
    if (lambda_ == 1.0) return anchor_->next_distribution(ctx);
    if (lambda_ == 0.0) return base_->next_distribution(ctx);
    const Distribution a = anchor_->next_distribution(ctx);
    const Distribution b = base_->next_distribution(ctx);
    std::vector<double> probs(a.size());
    for (std::size_t i = 0; i < probs.size(); ++i) probs[i] = (1.0 - lambda_) * b[i] + lambda_ * a[i];
    return Distribution(std::move(probs));
  }

 private:
  static const LanguageModel& require(const ModelPtr& m) {
    if (!m) throw InputError("InterpolatedModel: null anchor model");
    return *m;
  }

  ModelPtr anchor_;
  ModelPtr base_;
  double lambda_;
};

/// Draft aligned toward `target` by `lambda`: the knob that stands in for
/// distillation. Raising lambda can only lower KL(interp || target).
inline std::shared_ptr<const InterpolatedModel> distill_interpolate(ModelPtr target, ModelPtr draft_base,
                                                                    double lambda) {
  return std::make_shared<const InterpolatedModel>(std::move(target), std::move(draft_base), lambda);
}

}  // namespace specdec
