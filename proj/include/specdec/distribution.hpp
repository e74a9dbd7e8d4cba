#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "specdec/error.hpp"
#include "specdec/vocabulary.hpp"

namespace specdec {

inline constexpr double kNormTolerance = 1e-9;
/// Floor added to q inside kl_divergence so zeros in a draft stay finite.
inline constexpr double kKlEpsilon = 1e-10;

/// Normalized next-token probabilities over a vocabulary.
class Distribution {
 public:
  /// Validates: entries are finite and >= 0, and sum to 1 within 1e-9.
  explicit Distribution(std::vector<double> probs) : probs_(std::move(probs)) {
    if (probs_.empty()) throw InputError("distribution must be non-empty");
    double sum = 0.0;
    for (double p : probs_) {
      if (!(p >= 0.0) || !std::isfinite(p)) throw InputError("probabilities must be finite and >= 0");
      sum += p;
    }
    if (std::abs(sum - 1.0) > kNormTolerance)
      throw InputError("probabilities sum to " + std::to_string(sum) + ", expected 1");
  }

  /// Normalizes non-negative scores (not logits) into a distribution.
  static Distribution from_scores(std::span<const double> scores) {
    double total = 0.0;
    for (double s : scores) {
      if (!(s >= 0.0) || !std::isfinite(s)) throw InputError("scores must be finite and >= 0");
      total += s;
    }
    if (!(total > 0.0)) throw InputError("scores must not all be zero");
    std::vector<double> probs(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) probs[i] = scores[i] / total;
    return Distribution(std::move(probs));
  }

  static Distribution one_hot(std::size_t size, TokenId k) {
    std::vector<double> probs(size, 0.0);
    probs.at(static_cast<std::size_t>(k)) = 1.0;
    return Distribution(std::move(probs));
  }

  static Distribution uniform(std::size_t size) {
    return Distribution(std::vector<double>(size, 1.0 / static_cast<double>(size)));
  }

  std::size_t size() const noexcept { return probs_.size(); }
  double operator[](std::size_t i) const noexcept { return probs_[i]; }
  double prob(TokenId t) const { return probs_.at(static_cast<std::size_t>(t)); }
  std::span<const double> probs() const noexcept { return probs_; }

  friend bool operator==(const Distribution&, const Distribution&) = default;

 private:
  std::vector<double> probs_;
};

/// Argmax; ties go to the lowest token id.
inline TokenId greedy_token(const Distribution& d) {
  auto probs = d.probs();
  // max_element returns the first maximal element.
  return static_cast<TokenId>(std::max_element(probs.begin(), probs.end()) - probs.begin());
}

/// Shannon entropy in nats, with 0 ln 0 = 0.
inline double entropy(const Distribution& d) {
  double h = 0.0;
  for (double p : d.probs())
    if (p > 0.0) h -= p * std::log(p);
  return std::max(h, 0.0);
}

/// KL(p || q) in nats. q is floored as (q + eps) / (1 + eps V) so zeros in q
/// stay finite; bit-identical inputs give exactly 0.
inline double kl_divergence(const Distribution& p, const Distribution& q) {
  if (p.size() != q.size())
    throw InputError("kl_divergence: length mismatch (" + std::to_string(p.size()) + " vs " +
                     std::to_string(q.size()) + ")");
  if (p == q) return 0.0;
  const double norm = 1.0 + kKlEpsilon * static_cast<double>(q.size());
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] == 0.0) continue;
    const double qf = (q[i] + kKlEpsilon) / norm;
    kl += p[i] * std::log(p[i] / qf);
  }
  return std::max(kl, 0.0);
}

/// The `k` most probable tokens with non-zero probability, highest first,
/// ties by lowest id.
inline std::vector<TokenId> top_tokens(const Distribution& d, std::size_t k) {
  std::vector<TokenId> ids;
  ids.reserve(d.size());
  for (std::size_t i = 0; i < d.size(); ++i)
    if (d[i] > 0.0) ids.push_back(static_cast<TokenId>(i));
  k = std::min(k, ids.size());
  std::partial_sort(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(k), ids.end(),
                    [&](TokenId a, TokenId b) {
                      const double pa = d.prob(a), pb = d.prob(b);
                      return pa != pb ? pa > pb : a < b;
                    });
  ids.resize(k);
  return ids;
}

inline std::size_t nonzero_count(const Distribution& d) {
  return static_cast<std::size_t>(
      std::count_if(d.probs().begin(), d.probs().end(), [](double p) { return p > 0.0; }));
}

}  // namespace specdec
