#pragma once

#include <algorithm>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "specdec/distribution.hpp"
#include "specdec/error.hpp"
#include "specdec/language_model.hpp"
#include "specdec/metrics.hpp"
#include "specdec/spec_tree.hpp"

namespace specdec {

struct VerificationResult {
  std::vector<TokenId> accepted_tokens;
  std::vector<NodeId> accepted_nodes;
  /// Target's own greedy token where agreement stopped. Absent only when
  /// the accepted path ends in eos.
  std::optional<TokenId> bonus_token;
  std::size_t nodes_scored = 0;

  std::size_t cycle_acceptance() const noexcept { return accepted_tokens.size() + (bonus_token ? 1 : 0); }
};

/// Target-only greedy decoding: the reference output.
inline std::vector<TokenId> greedy_decode(const LanguageModel& target, const Context& prompt, int max_tokens) {
  if (max_tokens < 1) throw InputError("greedy_decode: max_tokens must be >= 1");
  const TokenId eos = target.vocabulary().eos_id();
  std::vector<TokenId> ctx(prompt.tokens().begin(), prompt.tokens().end());
  std::vector<TokenId> out;
  while (out.size() < static_cast<std::size_t>(max_tokens)) {
    const TokenId t = greedy_token(target.next_distribution(ctx));
    out.push_back(t);
    if (t == eos) break;
    ctx.push_back(t);
  }
  return out;
}

/// Walks the tree from the root, following the child that carries the
/// target's greedy token for the current path, and stops at the first
/// mismatch. Outputs match a target running alone by construction.
inline VerificationResult verify_tree(const LanguageModel& target, const SpecTree& tree) {
  const TokenId eos = target.vocabulary().eos_id();
  VerificationResult result;
  std::vector<TokenId> ctx(tree.root_context().tokens().begin(), tree.root_context().tokens().end());
  NodeId cur = kRootId;
  while (ctx.back() != eos) {
    const TokenId g = greedy_token(target.next_distribution(ctx));
    ++result.nodes_scored;
    const NodeId child = tree.find_child(cur, g);
    if (child == kNoParent) {
      result.bonus_token = g;
      break;
    }
    result.accepted_tokens.push_back(g);
    result.accepted_nodes.push_back(child);
    ctx.push_back(g);
    cur = child;
  }
  return result;
}

enum class ExpansionMode {
  kBestFirst,       // expand_tree_budgeted: draft queried only for kept nodes
  kExpandThenPrune  // expand_tree followed by prune_tree
};

struct DecodeResult {
  std::vector<TokenId> tokens;
  DecodeStats stats;
};

/// Draft-and-verify loop. Each cycle builds a pruned speculative tree,
/// verifies it against the target, and emits the accepted path plus the
/// bonus token, truncated so exactly `max_tokens` tokens are produced
/// unless eos comes first. Output is identical to greedy_decode(target).
inline DecodeResult speculative_decode(const LanguageModel& draft, const LanguageModel& target, const Context& prompt,
                                       int max_tokens, const BranchPolicy& policy,
                                       ExpansionMode mode = ExpansionMode::kBestFirst) {
  if (!(draft.vocabulary() == target.vocabulary()))
    throw InputError("speculative_decode: draft and target vocabularies differ");
  if (max_tokens < 1) throw InputError("speculative_decode: max_tokens must be >= 1");
  policy.validate();
  check_token_range(target.vocabulary(), prompt.tokens());
  if (prompt.back() == target.vocabulary().eos_id()) throw InputError("speculative_decode: prompt already ends in eos");

  const TokenId eos = target.vocabulary().eos_id();
  const auto limit = static_cast<std::size_t>(max_tokens);
  DecodeResult out;
  std::vector<TokenId> ctx(prompt.tokens().begin(), prompt.tokens().end());
  while (out.tokens.size() < limit) {
    const Context root(target.vocabulary(), ctx);
    const SpecTree tree = mode == ExpansionMode::kBestFirst
                              ? expand_tree_budgeted(draft, root, policy)
                              : prune_tree(expand_tree(draft, root, policy), policy.node_budget);
    const VerificationResult vr = verify_tree(target, tree);

    std::vector<TokenId> emission = vr.accepted_tokens;
    if (vr.bonus_token) emission.push_back(*vr.bonus_token);
    emission.resize(std::min(emission.size(), limit - out.tokens.size()));

    DecodeStats& s = out.stats;
    ++s.cycles;
    ++s.target_passes;
    s.target_context_evals += vr.nodes_scored;
    s.target_tree_contexts += tree.nodes().size();
    s.draft_calls += tree.draft_calls();
    s.tree_nodes += tree.size();
    s.emitted_tokens += emission.size();
    s.per_cycle_acceptance.push_back(static_cast<std::uint32_t>(emission.size()));

    out.tokens.insert(out.tokens.end(), emission.begin(), emission.end());
    if (!emission.empty() && emission.back() == eos) break;
    ctx.insert(ctx.end(), emission.begin(), emission.end());
  }
  return out;
}

}  // namespace specdec
