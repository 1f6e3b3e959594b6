// Copyright (C) 2026 The tmplgen Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <numeric>
#include <random>
#include <set>

#include "test_support.hpp"
#include "tmplgen/grammar_io.hpp"
#include "tmplgen/pattern_tree.hpp"

namespace tmplgen {
namespace {

using testing::chain_toy;
using testing::inner_node;
using testing::leaf_node;
using testing::sized_meta;

void expect_conservation(const TreeNode& node) {
  if (node.is_leaf()) return;
  Count sum = 0;
  for (const auto& c : node.children) {
    sum += c.weight;
    expect_conservation(c);
  }
  EXPECT_EQ(node.weight, sum) << node.id;
}

TEST(AccumulateWeights, ParentSumsChildren) {
  Grammar g;
  g.meta_templates.push_back(sized_meta(g, "a", {3, 4}));
  g.meta_templates.push_back(sized_meta(g, "b", {2, 4}));
  WeightedTree t;
  t.root.children.push_back(inner_node(
      "d", 1, "declarative",
      {inner_node("d/s", 2, "simple",
                  {inner_node("d/s/sp", 3, "subject-predicate", {leaf_node("a", 0), leaf_node("b", 1)})})}));
  const auto acc = accumulate_weights(t, g);
  const TreeNode& parent = acc.root.children[0].children[0].children[0];
  EXPECT_EQ(parent.children[0].weight, 12u);
  EXPECT_EQ(parent.children[1].weight, 8u);
  EXPECT_EQ(parent.weight, 20u);
  EXPECT_EQ(total_count(acc), 20u);
  EXPECT_EQ(parent.children[1].offset, 12u);
}

TEST(AccumulateWeights, ChainCarriesLeafWeight) {
  auto toy = chain_toy({{7}});
  accumulate_weights_in_place(toy.tree, toy.grammar);
  for (const TreeNode* n = &toy.tree.root;; n = &n->children[0]) {
    EXPECT_EQ(n->weight, 7u) << n->id;
    if (n->is_leaf()) break;
  }
}

TEST(AccumulateWeights, IsIdempotent) {
  auto toy = testing::toy_a1_b3();
  accumulate_weights_in_place(toy.tree, toy.grammar);
  const Count first = toy.tree.total;
  toy.tree.root.children[0].weight = 999;  // stale value gets recomputed
  accumulate_weights_in_place(toy.tree, toy.grammar);
  EXPECT_EQ(toy.tree.total, first);
  EXPECT_EQ(toy.tree.root.children[0].weight, 1u);
}

TEST(AccumulateWeights, DefaultTreeMatchesEnumeration) {
  auto bundle = load_grammar(testing::default_grammar_path());
  accumulate_weights_in_place(bundle.tree, bundle.grammar);
  expect_conservation(bundle.tree.root);
  Count oracle = 0;
  for (const auto& m : bundle.grammar.meta_templates) {
    std::set<std::string> distinct;
    for_each_template(m, bundle.grammar, 1'000'000, [&](Count, const std::string& s) { distinct.insert(s); });
    oracle += distinct.size();
  }
  EXPECT_EQ(total_count(bundle.tree), oracle);
}

TEST(AccumulateWeights, RandomTreesConserveWeight) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    auto toy = testing::random_toy(rng);
    accumulate_weights_in_place(toy.tree, toy.grammar);
    expect_conservation(toy.tree.root);
    Count leaves_sum = 0;
    for (const auto* leaf : leaves(toy.tree)) leaves_sum += leaf->weight;
    EXPECT_EQ(toy.tree.total, leaves_sum);
  }
}

TEST(Structure, LeafAboveLevelFourIsRejected) {
  Grammar g;
  g.meta_templates.push_back(sized_meta(g, "a", {2}));
  WeightedTree t;
  TreeNode shallow = leaf_node("a", 0);
  shallow.level = 3;
  t.root.children.push_back(inner_node("d", 1, "declarative",
                                       {inner_node("d/s", 2, "simple", {shallow})}));
  EXPECT_THROW(accumulate_weights(t, g), StructureError);
}

TEST(Structure, EmptyInternalNodeIsRejected) {
  auto toy = testing::toy_a1_b3();
  toy.tree.root.children[1].children[0].children.clear();
  try {
    accumulate_weights(toy.tree, toy.grammar);
    FAIL() << "expected StructureError";
  } catch (const StructureError& e) {
    EXPECT_NE(std::string(e.what()).find("imp/simple"), std::string::npos);
  }
}

TEST(Structure, UnknownTaxonomyLabel) {
  auto toy = testing::toy_a1_b3();
  toy.tree.root.children[0].label = "interrogative";
  const auto diags = check_structure(toy.tree, toy.grammar);
  ASSERT_EQ(diags.size(), 1u);
  EXPECT_EQ(diags[0].subject, "node 'decl'");
}

TEST(TotalCount, RequiresAccumulation) {
  auto toy = testing::toy_a1_b3();
  EXPECT_THROW(total_count(toy.tree), StateError);
  accumulate_weights_in_place(toy.tree, toy.grammar);
  EXPECT_EQ(total_count(toy.tree), 4u);
}

TEST(SampleTemplate, ToyTreeIsUniform) {
  auto toy = testing::toy_a1_b3();
  accumulate_weights_in_place(toy.tree, toy.grammar);
  Rng rng = make_rng(2024);
  std::vector<std::size_t> hist(4, 0);
  const int draws = 40'000;
  for (int i = 0; i < draws; ++i) ++hist[sample_template(toy.tree, toy.grammar, rng).global_index];
  for (auto h : hist) EXPECT_NEAR(static_cast<double>(h) / draws, 0.25, 0.02);
  EXPECT_LT(testing::chi_square_uniform(hist), testing::chi_square_critical(3, 0.001));
}

TEST(SampleTemplate, RecordsAreConsistent) {
  auto toy = testing::toy_a1_b3();
  accumulate_weights_in_place(toy.tree, toy.grammar);
  Rng rng = make_rng(5);
  for (int i = 0; i < 200; ++i) {
    const auto r = sample_template(toy.tree, toy.grammar, rng);
    const auto& meta = *toy.grammar.find_meta(r.leaf_path.back());
    EXPECT_EQ(r.text, render(meta, r.choices, toy.grammar));
    EXPECT_EQ(r.leaf_path.size(), 4u);
  }
}

TEST(SampleTemplate, SingleZeroSlotLeaf) {
  auto toy = chain_toy({{}});
  accumulate_weights_in_place(toy.tree, toy.grammar);
  Rng rng = make_rng(1);
  for (int i = 0; i < 50; ++i) {
    EXPECT_EQ(sample_template(toy.tree, toy.grammar, rng).text, "[leaf0] {question}\n{choices}");
  }
}

TEST(SampleTemplate, SeedDeterminism) {
  auto bundle = load_checked(testing::default_grammar_path());
  Rng a = make_rng(42), b = make_rng(42);
  for (int i = 0; i < 500; ++i) {
    ASSERT_EQ(sample_template(bundle.tree, bundle.grammar, a),
              sample_template(bundle.tree, bundle.grammar, b));
  }
}

TEST(SampleTemplate, EmptySpaceAndStateErrors) {
  auto toy = testing::toy_a1_b3();
  Rng rng = make_rng(1);
  EXPECT_THROW(sample_template(toy.tree, toy.grammar, rng), StateError);
  WeightedTree empty;
  empty.accumulated = true;
  EXPECT_THROW(sample_template(empty, toy.grammar, rng), CapacityError);
}

// Exact probability of every template: product of w(child)/w(parent) along
// the path times 1/count(leaf), compared with 1/total by cross-multiplying.
TEST(SampleTemplate, ExactMarginalIsOneOverTotal) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 30; ++trial) {
    auto toy = testing::random_toy(rng);
    accumulate_weights_in_place(toy.tree, toy.grammar);
    std::function<void(const TreeNode&, Count, Count)> walk = [&](const TreeNode& n, Count num, Count den) {
      if (n.is_leaf()) {
        // P(template) = num / (den * weight(leaf)).
        const Count g1 = std::gcd(num, den);
        num /= g1;
        den /= g1;
        EXPECT_EQ(num * toy.tree.total, den * n.weight) << n.id;
        return;
      }
      for (const auto& c : n.children) {
        const Count nn = num * c.weight;
        const Count dd = den * n.weight;
        const Count g2 = std::gcd(nn, dd);
        walk(c, nn / g2, dd / g2);
      }
    };
    walk(toy.tree.root, 1, 1);
  }
}

}  // namespace
}  // namespace tmplgen
