#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <set>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "specdec/spec_tree.hpp"
#include "support/test_models.hpp"

namespace specdec {
namespace {

using testing::FixedRowModel;
using testing::make_vocab;
using testing::RandomTableModel;

// a, b, c, d are ids 0-3; bos and eos sit at 4 and 5 so they never win
// lowest-id tie-breaks.
std::shared_ptr<const Vocabulary> abcd_vocab() {
  return std::make_shared<const Vocabulary>(std::vector<std::string>{"a", "b", "c", "d", "<s>", "</s>"}, 4, 5);
}

std::shared_ptr<const Vocabulary> ab_vocab() {
  return std::make_shared<const Vocabulary>(std::vector<std::string>{"a", "b", "<s>", "</s>"}, 2, 3);
}

Context root_of(const Vocabulary& v) { return Context(v, {v.bos_id()}); }

SpecTree uniform_binary_tree() {
  auto vocab = ab_vocab();
  FixedRowModel draft(vocab, Distribution::uniform(4));
  return expand_tree(draft, root_of(*vocab), BranchPolicy{0.0, 2, 2, 6});
}

TEST(BranchWidth, Examples) {
  EXPECT_EQ(branch_width(Distribution::one_hot(8, 2), BranchPolicy{0.5, 4, 3, 8}), 1);
  EXPECT_EQ(branch_width(Distribution::uniform(16), BranchPolicy{1.0, 4, 3, 8}), 4);
  EXPECT_EQ(branch_width(Distribution({0.5, 0.5, 0.0, 0.0}), BranchPolicy{1.0, 4, 3, 8}), 1);
}

TEST(BranchWidth, NeverExceedsSupport) {
  // ln 2 >= tau, so the wide branch applies, but only two tokens are live.
  EXPECT_EQ(branch_width(Distribution({0.5, 0.5, 0.0, 0.0}), BranchPolicy{0.1, 4, 3, 8}), 2);
  EXPECT_EQ(branch_width(Distribution::one_hot(8, 2), BranchPolicy{0.0, 4, 3, 8}), 1);
}

TEST(BranchWidth, InfiniteThresholdAlwaysNarrow) {
  const double inf = std::numeric_limits<double>::infinity();
  EXPECT_EQ(branch_width(Distribution::uniform(16), BranchPolicy{inf, 4, 3, 8}), 1);
}

TEST(ExpandTree, OneHotDraftBuildsChain) {
  auto vocab = abcd_vocab();
  ConstantModel draft(vocab, 2);
  const SpecTree t = expand_tree(draft, root_of(*vocab), BranchPolicy{1.0, 3, 4, 8});
  ASSERT_EQ(t.size(), 4u);
  for (NodeId id = 1; id <= 4; ++id) {
    EXPECT_EQ(t.node(id).parent, id - 1);
    EXPECT_EQ(t.node(id).token, 2);
    EXPECT_EQ(t.node(id).cum_logprob, 0.0);
  }
  EXPECT_EQ(t.draft_calls(), 4u);
}

TEST(ExpandTree, UniformDraftBuildsPerfectBinaryTree) {
  const SpecTree t = uniform_binary_tree();
  t.check_invariants();
  ASSERT_EQ(t.size(), 6u);
  int depth2 = 0;
  for (const auto& n : t.nodes()) {
    if (n.depth == 1) {
      EXPECT_NEAR(n.cum_logprob, std::log(0.25), 1e-15);
    }
    if (n.depth == 2) {
      ++depth2;
      EXPECT_NEAR(n.cum_logprob, 2 * std::log(0.25), 1e-15);
    }
  }
  EXPECT_EQ(depth2, 4);
  EXPECT_EQ(t.draft_calls(), 3u);
}

TEST(ExpandTree, EosChildIsNotExpanded) {
  auto vocab = abcd_vocab();
  ConstantModel draft(vocab, vocab->eos_id());
  const SpecTree t = expand_tree(draft, root_of(*vocab), BranchPolicy{1.0, 2, 5, 8});
  ASSERT_EQ(t.size(), 1u);
  EXPECT_EQ(t.node(1).token, vocab->eos_id());
  EXPECT_TRUE(t.node(1).children.empty());
}

TEST(ExpandTree, GoldenRendering) {
  const SpecTree t = uniform_binary_tree();
  std::ifstream golden(SPECDEC_GOLDEN_DIR "/uniform_binary_tree.txt");
  ASSERT_TRUE(golden.good());
  std::stringstream expected;
  expected << golden.rdbuf();
  EXPECT_EQ(render_tree(t, *ab_vocab()), expected.str());
}

TEST(PruneTree, ChainWithinBudgetIsUnchanged) {
  auto vocab = abcd_vocab();
  ConstantModel draft(vocab, 1);
  const SpecTree chain = expand_tree(draft, root_of(*vocab), BranchPolicy{1.0, 1, 5, 5});
  for (int n : {5, 6, 50}) EXPECT_EQ(prune_tree(chain, n), chain);
}

TEST(PruneTree, BudgetOfOneKeepsBestDepthOneNode) {
  auto vocab = abcd_vocab();
  FixedRowModel draft(vocab, Distribution({0.1, 0.5, 0.3, 0.1, 0.0, 0.0}));
  const SpecTree full = expand_tree(draft, root_of(*vocab), BranchPolicy{0.0, 3, 3, 3});
  const SpecTree one = prune_tree(full, 1);
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(one.node(1).token, 1);
  EXPECT_EQ(one.node(1).depth, 1);
}

TEST(PruneTree, RejectsNonPositiveBudget) {
  EXPECT_THROW(prune_tree(uniform_binary_tree(), 0), InputError);
}

// Every ancestor-closed set of `k` non-root nodes, as a bitmask over ids.
std::vector<unsigned> connected_subsets(const SpecTree& t, std::size_t k) {
  std::vector<unsigned> out;
  const std::size_t n = t.size();
  for (unsigned mask = 0; mask < (1u << n); ++mask) {
    if (static_cast<std::size_t>(__builtin_popcount(mask)) != k) continue;
    bool closed = true;
    for (std::size_t i = 1; i <= n && closed; ++i) {
      if (!(mask >> (i - 1) & 1u)) continue;
      const NodeId p = t.node(static_cast<NodeId>(i)).parent;
      if (p != kRootId && !(mask >> (p - 1) & 1u)) closed = false;
    }
    if (closed) out.push_back(mask);
  }
  return out;
}

TEST(PruneTree, BinaryTreeBudgetThreeIsScoreMaximal) {
  const SpecTree full = uniform_binary_tree();
  const SpecTree pruned = prune_tree(full, 3);
  pruned.check_invariants();
  ASSERT_EQ(pruned.size(), 3u);

  double best = -std::numeric_limits<double>::infinity();
  for (unsigned mask : connected_subsets(full, 3)) {
    double sum = 0.0;
    for (std::size_t i = 1; i <= full.size(); ++i)
      if (mask >> (i - 1) & 1u) sum += full.node(static_cast<NodeId>(i)).cum_logprob;
    best = std::max(best, sum);
  }
  double chosen = 0.0;
  for (NodeId id = 1; id <= 3; ++id) chosen += pruned.node(id).cum_logprob;
  EXPECT_NEAR(chosen, best, 1e-12);

  // Tie-breaks: both depth-1 nodes, then the lexicographically first
  // depth-2 path, a -> a.
  std::set<std::vector<TokenId>> paths;
  for (NodeId id = 1; id <= 3; ++id) paths.insert(pruned.path_tokens(id));
  EXPECT_EQ(paths, (std::set<std::vector<TokenId>>{{0}, {1}, {0, 0}}));
}

TEST(PruneTree, IsIdempotent) {
  std::mt19937_64 rng(8);
  auto vocab = make_vocab(7);
  for (int trial = 0; trial < 300; ++trial) {
    RandomTableModel draft(vocab, rng(), 2, trial % 2 ? 3 : 0);
    const auto policy = testing::random_policy(rng, 2.0, 3, 4, 10);
    const auto once = prune_tree(expand_tree(draft, testing::random_prompt(*vocab, rng, 2), policy), policy.node_budget);
    EXPECT_EQ(prune_tree(once, policy.node_budget), once);
  }
}

TEST(ExpandTreeBudgeted, MatchesExpandThenPrune) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 2000; ++trial) {
    auto vocab = make_vocab(3 + rng() % 8);
    // Quantized rows make score ties common, which exercises every tie-break.
    RandomTableModel draft(vocab, rng(), 1 + static_cast<int>(rng() % 3), static_cast<int>(rng() % 4),
                           1.0 + static_cast<double>(rng() % 3), 0.3);
    const auto policy = testing::random_policy(rng, std::log(static_cast<double>(vocab->size())), 4, 4, 14);
    const Context ctx = testing::random_prompt(*vocab, rng, rng() % 4);
    const SpecTree reference = prune_tree(expand_tree(draft, ctx, policy), policy.node_budget);
    const SpecTree fast = expand_tree_budgeted(draft, ctx, policy);
    ASSERT_EQ(fast, reference) << "trial " << trial;
    EXPECT_LE(fast.draft_calls(), static_cast<std::size_t>(policy.node_budget));
  }
}

TEST(SpecTree, AddChildRejectsBadInput) {
  auto vocab = abcd_vocab();
  SpecTree t(root_of(*vocab), 2, 4);
  const NodeId a = t.add_child(kRootId, 0, 0.5);
  EXPECT_THROW(t.add_child(kRootId, 0, 0.2), InputError);  // duplicate sibling token
  EXPECT_THROW(t.add_child(kRootId, 1, 0.0), InputError);
  EXPECT_THROW(t.add_child(kRootId, 1, 1.5), InputError);
  const NodeId aa = t.add_child(a, 2, 0.5);
  EXPECT_THROW(t.add_child(aa, 3, 0.5), InputError);  // beyond max depth
  EXPECT_NEAR(t.node(aa).cum_logprob, 2 * std::log(0.5), 1e-15);
}

TEST(BranchPolicy, Validation) {
  EXPECT_THROW((BranchPolicy{-1.0, 1, 1, 1}.validate()), InputError);
  EXPECT_THROW((BranchPolicy{1.0, 0, 1, 1}.validate()), InputError);
  EXPECT_THROW((BranchPolicy{1.0, 1, 0, 1}.validate()), InputError);
  EXPECT_THROW((BranchPolicy{1.0, 3, 2, 2}.validate()), InputError);
  EXPECT_NO_THROW(BranchPolicy::chain(7).validate());
}

}  // namespace
}  // namespace specdec
