#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "specdec/distribution.hpp"
#include "specdec/error.hpp"
#include "specdec/language_model.hpp"

namespace specdec {

/// Per-run accounting for speculative decoding.
///
/// Target cost is tracked three ways because the hardware model is left
/// open: `target_passes` counts one batched verification pass per cycle,
/// `target_context_evals` counts the root-path contexts a sequential
/// verifier actually needs, and `target_tree_contexts` counts every context
/// a tree-attention pass scores (all tree nodes plus the root).
struct DecodeStats {
  std::uint64_t cycles = 0;
  std::uint64_t emitted_tokens = 0;
  std::uint64_t target_passes = 0;
  std::uint64_t target_context_evals = 0;
  std::uint64_t target_tree_contexts = 0;
  std::uint64_t draft_calls = 0;
  std::uint64_t tree_nodes = 0;  // non-root nodes over all verified trees
  std::vector<std::uint32_t> per_cycle_acceptance;

  /// Mean tokens emitted per cycle; 0 for an empty record.
  double gamma() const noexcept {
    return cycles == 0 ? 0.0 : static_cast<double>(emitted_tokens) / static_cast<double>(cycles);
  }

  double draft_calls_per_cycle() const noexcept {
    return cycles == 0 ? 0.0 : static_cast<double>(draft_calls) / static_cast<double>(cycles);
  }

  double tree_nodes_per_cycle() const noexcept {
    return cycles == 0 ? 0.0 : static_cast<double>(tree_nodes) / static_cast<double>(cycles);
  }

  /// Accumulates another run (e.g. the next prompt of the same cell).
  DecodeStats& operator+=(const DecodeStats& o) {
    cycles += o.cycles;
    emitted_tokens += o.emitted_tokens;
    target_passes += o.target_passes;
    target_context_evals += o.target_context_evals;
    target_tree_contexts += o.target_tree_contexts;
    draft_calls += o.draft_calls;
    tree_nodes += o.tree_nodes;
    per_cycle_acceptance.insert(per_cycle_acceptance.end(), o.per_cycle_acceptance.begin(),
                                o.per_cycle_acceptance.end());
    return *this;
  }

  friend bool operator==(const DecodeStats&, const DecodeStats&) = default;
};

/// Relative costs, in units of one single-context target call.
struct CostModel {
  double draft_call = 0.05;    // c
  double target_batch = 1.0;   // t_batch: one batched tree-verification pass

  void validate() const {
    if (!(draft_call > 0.0)) throw InputError("cost model: draft call cost must be > 0");
    if (!(target_batch >= 1.0)) throw InputError("cost model: target batch cost must be >= 1");
  }
};

enum class KlDirection { kTargetDraft, kDraftTarget };

inline std::string to_string(KlDirection d) {
  return d == KlDirection::kTargetDraft ? "target_draft" : "draft_target";
}

inline KlDirection parse_kl_direction(const std::string& s) {
  if (s == "target_draft") return KlDirection::kTargetDraft;
  if (s == "draft_target") return KlDirection::kDraftTarget;
  throw InputError("unknown kl direction '" + s + "' (expected target_draft or draft_target)");
}

inline double mean_acceptance(std::span<const std::uint32_t> per_cycle) {
  if (per_cycle.empty()) throw InputError("mean_acceptance: no cycles recorded");
  const double sum = std::accumulate(per_cycle.begin(), per_cycle.end(), 0.0);
  return sum / static_cast<double>(per_cycle.size());
}

inline double mean_acceptance(const DecodeStats& stats) { return mean_acceptance(stats.per_cycle_acceptance); }

/// Mean KL over the probe contexts. The default direction treats the target
/// as the reference distribution: KL(target || draft).
inline double estimate_kl(const LanguageModel& draft, const LanguageModel& target,
                          std::span<const Context> probes,
                          KlDirection direction = KlDirection::kTargetDraft) {
  if (probes.empty()) throw InputError("estimate_kl: probe set is empty");
  if (!(draft.vocabulary() == target.vocabulary()))
    throw InputError("estimate_kl: draft and target vocabularies differ");
  double total = 0.0;
  for (const Context& ctx : probes) {
    const Distribution p = target.next_distribution(ctx);
    const Distribution q = draft.next_distribution(ctx);
    total += direction == KlDirection::kTargetDraft ? kl_divergence(p, q) : kl_divergence(q, p);
  }
  return total / static_cast<double>(probes.size());
}

/// Analytic speedup over target-only greedy decoding, in target-call units:
/// tokens per cycle divided by cycle cost t_batch + c * draft_calls_per_cycle.
/// A cost model, not a wall-clock measurement.
inline double predicted_speedup(double gamma, const CostModel& cost, double draft_calls_per_cycle) {
  if (!(gamma >= 1.0)) throw InputError("predicted_speedup: gamma must be >= 1");
  if (!(cost.draft_call >= 0.0) || !(cost.target_batch > 0.0))
    throw InputError("predicted_speedup: costs must be positive");
  if (!(draft_calls_per_cycle >= 0.0)) throw InputError("predicted_speedup: negative draft call count");
  return gamma / (cost.target_batch + cost.draft_call * draft_calls_per_cycle);
}

/// Average ranks (1-based), ties sharing the mean of their positions.
inline std::vector<double> fractional_ranks(std::span<const double> xs) {
  std::vector<std::size_t> idx(xs.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
  std::vector<double> ranks(xs.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && xs[idx[j + 1]] == xs[idx[i]]) ++j;
    const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
    i = j + 1;
  }
  return ranks;
}

/// Spearman rank correlation (Pearson correlation of fractional ranks).
inline double spearman(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size() || xs.size() < 2) throw InputError("spearman: need two equal-length series of size >= 2");
  const auto rx = fractional_ranks(xs), ry = fractional_ranks(ys);
  const double n = static_cast<double>(rx.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) throw InputError("spearman: a series is constant");
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace specdec
