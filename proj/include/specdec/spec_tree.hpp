#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <deque>
#include <limits>
#include <queue>
#include <string>
#include <utility>
#include <vector>

#include "specdec/distribution.hpp"
#include "specdec/error.hpp"
#include "specdec/language_model.hpp"
#include "specdec/vocabulary.hpp"

namespace specdec {

using NodeId = std::int32_t;
inline constexpr NodeId kRootId = 0;
inline constexpr NodeId kNoParent = -1;
inline constexpr TokenId kNoToken = -1;

struct SpecNode {
  NodeId id = kRootId;
  TokenId token = kNoToken;  // kNoToken only on the root
  NodeId parent = kNoParent;
  int depth = 0;
  double draft_prob = 1.0;
  double cum_logprob = 0.0;  // sum of ln(draft_prob) along the root path
  std::vector<NodeId> children;

  friend bool operator==(const SpecNode&, const SpecNode&) = default;
};

/// Shape of the speculative tree.
///
/// A draft distribution whose entropy is below `entropy_threshold` (nats)
/// contributes only its top-1 token; otherwise the top `max_branch` tokens
/// are expanded. `max_depth` bounds speculation length and `node_budget` is
/// the number of non-root nodes kept after pruning. An infinite threshold
/// (or max_branch = 1) yields a plain chain.
struct BranchPolicy {
  double entropy_threshold = 1.0;
  int max_branch = 4;
  int max_depth = 6;
  int node_budget = 16;

  /// Linear speculation of `depth` tokens.
  static BranchPolicy chain(int depth) { return {0.0, 1, depth, depth}; }

  void validate() const {
    if (!(entropy_threshold >= 0.0)) throw InputError("entropy_threshold must be >= 0");
    if (max_branch < 1) throw InputError("max_branch must be >= 1");
    if (max_depth < 1) throw InputError("max_depth must be >= 1");
    if (node_budget < 1) throw InputError("node_budget must be >= 1");
    if (max_branch > node_budget) throw InputError("max_branch must not exceed node_budget");
  }

  friend bool operator==(const BranchPolicy&, const BranchPolicy&) = default;
};

/// Rooted tree of speculative continuations of `root_context`.
///
/// Node 0 is the root. Nodes are stored in breadth-first order, children
/// in the order they were proposed (draft probability descending, then
/// token id ascending), so two trees with the same content compare equal.
class SpecTree {
 public:
  SpecTree(Context root_context, int max_depth, int node_budget)
      : root_context_(std::move(root_context)), max_depth_(max_depth), node_budget_(node_budget) {
    if (max_depth_ < 1) throw InputError("tree max_depth must be >= 1");
    if (node_budget_ < 1) throw InputError("tree node_budget must be >= 1");
    nodes_.push_back(SpecNode{});
  }

  NodeId add_child(NodeId parent, TokenId token, double draft_prob) {
    const SpecNode& p = node(parent);
    if (!(draft_prob > 0.0 && draft_prob <= 1.0)) throw InputError("draft_prob must lie in (0, 1]");
    if (p.depth + 1 > max_depth_) throw InputError("child would exceed tree max_depth");
    for (NodeId c : p.children)
      if (nodes_[static_cast<std::size_t>(c)].token == token) throw InputError("siblings must carry distinct tokens");
    SpecNode child;
    child.id = static_cast<NodeId>(nodes_.size());
    child.token = token;
    child.parent = parent;
    child.depth = p.depth + 1;
    child.draft_prob = draft_prob;
    child.cum_logprob = p.cum_logprob + std::log(draft_prob);
    nodes_.push_back(std::move(child));
    nodes_[static_cast<std::size_t>(parent)].children.push_back(nodes_.back().id);
    return nodes_.back().id;
  }

  const Context& root_context() const noexcept { return root_context_; }
  int max_depth() const noexcept { return max_depth_; }
  int node_budget() const noexcept { return node_budget_; }
  const std::vector<SpecNode>& nodes() const noexcept { return nodes_; }

  const SpecNode& node(NodeId id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= nodes_.size()) throw InputError("node id out of range");
    return nodes_[static_cast<std::size_t>(id)];
  }
  const SpecNode& root() const noexcept { return nodes_.front(); }

  /// Non-root node count.
  std::size_t size() const noexcept { return nodes_.size() - 1; }

  /// Nodes with at least one child (the root included when it has any).
  std::size_t internal_count() const noexcept {
    return static_cast<std::size_t>(
        std::count_if(nodes_.begin(), nodes_.end(), [](const SpecNode& n) { return !n.children.empty(); }));
  }

  int height() const noexcept {
    int h = 0;
    for (const auto& n : nodes_) h = std::max(h, n.depth);
    return h;
  }

  /// Child of `parent` carrying `token`, or kNoParent.
  NodeId find_child(NodeId parent, TokenId token) const {
    for (NodeId c : node(parent).children)
      if (nodes_[static_cast<std::size_t>(c)].token == token) return c;
    return kNoParent;
  }

  /// Tokens from the root (exclusive) down to `id` (inclusive).
  std::vector<TokenId> path_tokens(NodeId id) const {
    std::vector<TokenId> path;
    for (NodeId cur = id; cur != kRootId; cur = node(cur).parent) path.push_back(node(cur).token);
    std::reverse(path.begin(), path.end());
    return path;
  }

  /// Root context extended by the path to `id`.
  std::vector<TokenId> context_for(NodeId id) const {
    std::vector<TokenId> ctx(root_context_.tokens().begin(), root_context_.tokens().end());
    auto path = path_tokens(id);
    ctx.insert(ctx.end(), path.begin(), path.end());
    return ctx;
  }

  /// Draft distribution queries spent building this tree.
  std::size_t draft_calls() const noexcept { return draft_calls_; }
  void set_draft_calls(std::size_t n) noexcept { draft_calls_ = n; }

  /// Throws InputError describing the first broken structural invariant.
  void check_invariants() const {
    if (nodes_.empty() || nodes_[0].parent != kNoParent || nodes_[0].depth != 0 || nodes_[0].cum_logprob != 0.0)
      throw InputError("malformed root");
    for (std::size_t i = 1; i < nodes_.size(); ++i) {
      const SpecNode& n = nodes_[i];
      if (n.id != static_cast<NodeId>(i)) throw InputError("node id mismatch");
      if (n.parent < 0 || n.parent >= n.id) throw InputError("parent missing or out of order");
      const SpecNode& p = nodes_[static_cast<std::size_t>(n.parent)];
      if (std::find(p.children.begin(), p.children.end(), n.id) == p.children.end())
        throw InputError("node not listed among its parent's children");
      if (n.depth != p.depth + 1) throw InputError("depth != parent depth + 1");
      if (n.depth > max_depth_) throw InputError("node deeper than max_depth");
      if (!(n.draft_prob > 0.0 && n.draft_prob <= 1.0)) throw InputError("draft_prob outside (0, 1]");
      if (n.token < 0) throw InputError("non-root node without token");
    }
    for (const SpecNode& n : nodes_) {
      for (std::size_t a = 0; a < n.children.size(); ++a) {
        const NodeId c = n.children[a];
        if (c <= n.id || static_cast<std::size_t>(c) >= nodes_.size() || nodes_[static_cast<std::size_t>(c)].parent != n.id)
          throw InputError("child list inconsistent with parent links");
        for (std::size_t b = a + 1; b < n.children.size(); ++b)
          if (nodes_[static_cast<std::size_t>(c)].token == nodes_[static_cast<std::size_t>(n.children[b])].token)
            throw InputError("siblings share a token");
      }
    }
  }

  friend bool operator==(const SpecTree& a, const SpecTree& b) {
    return a.root_context_ == b.root_context_ && a.max_depth_ == b.max_depth_ && a.nodes_ == b.nodes_;
  }

  /// Copy of the subtree made of `keep` (which must be ancestor-closed and
  /// include the root), renumbered breadth-first with child order kept.
  SpecTree subtree(const std::vector<bool>& keep, int node_budget) const {
    SpecTree out(root_context_, max_depth_, node_budget);
    out.draft_calls_ = draft_calls_;
    std::deque<std::pair<NodeId, NodeId>> queue{{kRootId, kRootId}};  // (old, new)
    while (!queue.empty()) {
      auto [old_id, new_id] = queue.front();
      queue.pop_front();
      for (NodeId c : node(old_id).children) {
        if (!keep[static_cast<std::size_t>(c)]) continue;
        const SpecNode& src = node(c);
        const NodeId added = out.add_child(new_id, src.token, src.draft_prob);
        // keep the stored score rather than recomputing it through a new log
        out.nodes_[static_cast<std::size_t>(added)].cum_logprob = src.cum_logprob;
        queue.emplace_back(c, added);
      }
    }
    return out;
  }

 private:
  Context root_context_;
  int max_depth_;
  int node_budget_;
  std::vector<SpecNode> nodes_;
  std::size_t draft_calls_ = 0;
};

/// 1 when the draft is confident (entropy below the threshold), else
/// max_branch, capped by the number of tokens with non-zero probability.
inline int branch_width(const Distribution& dist, const BranchPolicy& policy) {
  const int nonzero = static_cast<int>(nonzero_count(dist));
  if (entropy(dist) < policy.entropy_threshold) return std::min(1, nonzero);
  return std::min(policy.max_branch, nonzero);
}

/// Breadth-first expansion to `policy.max_depth` with no budget applied.
/// eos nodes are kept as leaves.
inline SpecTree expand_tree(const LanguageModel& draft, const Context& ctx, const BranchPolicy& policy) {
  policy.validate();
  check_token_range(draft.vocabulary(), ctx.tokens());
  const TokenId eos = draft.vocabulary().eos_id();
  SpecTree tree(ctx, policy.max_depth, policy.node_budget);
  if (ctx.back() == eos) return tree;
  std::size_t calls = 0;
  std::deque<NodeId> frontier{kRootId};
  while (!frontier.empty()) {
    const NodeId id = frontier.front();
    frontier.pop_front();
    const SpecNode& n = tree.node(id);
    if (n.depth >= policy.max_depth || n.token == eos) continue;
    const Distribution dist = draft.next_distribution(tree.context_for(id));
    ++calls;
    const int width = branch_width(dist, policy);
    for (TokenId t : top_tokens(dist, static_cast<std::size_t>(width)))
      frontier.push_back(tree.add_child(id, t, dist.prob(t)));
  }
  tree.set_draft_calls(calls);
  return tree;
}

namespace detail {

struct RankKey {
  double cum_logprob;
  int depth;
  TokenId token;
  std::vector<TokenId> path;
};

/// Pruning order: higher cumulative log-probability first, then smaller
/// depth, then lower token id, then lexicographically smaller root path.
inline bool ranks_before(const RankKey& a, const RankKey& b) {
  if (a.cum_logprob != b.cum_logprob) return a.cum_logprob > b.cum_logprob;
  if (a.depth != b.depth) return a.depth < b.depth;
  if (a.token != b.token) return a.token < b.token;
  return a.path < b.path;
}

inline RankKey rank_key(const SpecTree& tree, NodeId id) {
  const SpecNode& n = tree.node(id);
  return RankKey{n.cum_logprob, n.depth, n.token, tree.path_tokens(id)};
}

}  // namespace detail

/// Keeps the `n` best non-root nodes by cumulative draft log-probability.
///
/// Nodes are taken in rank order; a node is admitted together with any
/// missing ancestors only if the whole group still fits the budget, so the
/// result is always a connected subtree. For trees whose scores fall along
/// every path (all trees built by expand_tree) this is exactly the top-n
/// set. Idempotent.
inline SpecTree prune_tree(const SpecTree& tree, int n) {
  if (n < 1) throw InputError("prune_tree: budget must be >= 1");
  const std::size_t total = tree.nodes().size();
  std::vector<NodeId> order;
  std::vector<detail::RankKey> keys(total);
  for (NodeId id = 1; static_cast<std::size_t>(id) < total; ++id) {
    order.push_back(id);
    keys[static_cast<std::size_t>(id)] = detail::rank_key(tree, id);
  }
  std::sort(order.begin(), order.end(), [&](NodeId a, NodeId b) {
    return detail::ranks_before(keys[static_cast<std::size_t>(a)], keys[static_cast<std::size_t>(b)]);
  });

  std::vector<bool> keep(total, false);
  keep[kRootId] = true;
  std::size_t kept = 0;
  const auto budget = static_cast<std::size_t>(n);
  std::vector<NodeId> group;
  for (NodeId id : order) {
    if (kept == budget) break;
    if (keep[static_cast<std::size_t>(id)]) continue;
    group.clear();
    for (NodeId cur = id; !keep[static_cast<std::size_t>(cur)]; cur = tree.node(cur).parent) group.push_back(cur);
    if (kept + group.size() > budget) continue;
    for (NodeId g : group) keep[static_cast<std::size_t>(g)] = true;
    kept += group.size();
  }
  return tree.subtree(keep, n);
}

/// Best-first expansion that only queries the draft for nodes that make the
/// budget. Produces the same tree as prune_tree(expand_tree(...), n) while
/// spending at most n draft calls instead of up to b^d.
inline SpecTree expand_tree_budgeted(const LanguageModel& draft, const Context& ctx, const BranchPolicy& policy) {
  policy.validate();
  check_token_range(draft.vocabulary(), ctx.tokens());
  const TokenId eos = draft.vocabulary().eos_id();
  SpecTree tree(ctx, policy.max_depth, policy.node_budget);
  if (ctx.back() == eos) return tree;

  struct Candidate {
    detail::RankKey key;
    NodeId parent;
    double prob;
  };
  auto worse = [](const Candidate& a, const Candidate& b) { return detail::ranks_before(b.key, a.key); };
  std::priority_queue<Candidate, std::vector<Candidate>, decltype(worse)> candidates(worse);

  std::size_t calls = 0;
  auto expand = [&](NodeId id) {
    const SpecNode& n = tree.node(id);
    if (n.depth >= policy.max_depth || n.token == eos) return;
    const Distribution dist = draft.next_distribution(tree.context_for(id));
    ++calls;
    std::vector<TokenId> path = tree.path_tokens(id);
    const int width = branch_width(dist, policy);
    for (TokenId t : top_tokens(dist, static_cast<std::size_t>(width))) {
      Candidate c{{n.cum_logprob + std::log(dist.prob(t)), n.depth + 1, t, path}, id, dist.prob(t)};
      c.key.path.push_back(t);
      candidates.push(std::move(c));
    }
  };

  const auto budget = static_cast<std::size_t>(policy.node_budget);
  expand(kRootId);
  while (tree.size() < budget && !candidates.empty()) {
    Candidate best = candidates.top();
    candidates.pop();
    const NodeId id = tree.add_child(best.parent, best.key.token, best.prob);
    if (tree.size() < budget) expand(id);
  }
  tree.set_draft_calls(calls);
  // renumber breadth-first, children in proposal order
  std::vector<bool> keep(tree.nodes().size(), true);
  SpecTree sorted = tree.subtree(keep, policy.node_budget);
  return sorted;
}

/// Stable text rendering for golden-file tests: one node per line, two
/// spaces of indentation per depth level, depth-first in child order.
inline std::string render_tree(const SpecTree& tree, const Vocabulary& vocab) {
  auto show = [&](TokenId t) {
    std::string out = "'";
    for (char c : vocab.token(t)) {
      if (c == '\n') out += "\\n";
      else if (c == '\t') out += "\\t";
      else if (c == '\'') out += "\\'";
      else out += c;
    }
    return out + "'";
  };
  std::string out = "<root> context_len=" + std::to_string(tree.root_context().size()) + "\n";
  std::vector<NodeId> stack(tree.root().children.rbegin(), tree.root().children.rend());
  char buf[96];
  while (!stack.empty()) {
    const SpecNode& n = tree.node(stack.back());
    stack.pop_back();
    out.append(static_cast<std::size_t>(2 * n.depth), ' ');
    std::snprintf(buf, sizeof buf, " p=%.6f cum=%.6f\n", n.draft_prob, n.cum_logprob);
    out += show(n.token);
    out += buf;
    stack.insert(stack.end(), n.children.rbegin(), n.children.rend());
  }
  return out;
}

}  // namespace specdec
