// Copyright (C) 2026 The tmplgen Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "tmplgen/tmplgen.hpp"

namespace tmplgen::testing {

inline std::filesystem::path default_grammar_path() { return TMPLGEN_DEFAULT_GRAMMAR; }

// Meta whose slots draw from sets named "<prefix>0", "<prefix>1"... with the
// given sizes. Candidates are "<prefix>j_k", so renderings never collide.
inline MetaTemplate sized_meta(Grammar& g, const std::string& id, const std::vector<std::size_t>& sizes) {
  MetaTemplate m{id, {Segment::fixed("[" + id + "]")}};
  for (std::size_t j = 0; j < sizes.size(); ++j) {
    const std::string set_id = id + "_s" + std::to_string(j);
    SynonymSet set{set_id, {}};
    for (std::size_t k = 0; k < sizes[j]; ++k) set.candidates.push_back(set_id + "_" + std::to_string(k));
    g.synonym_sets[set_id] = set;
    m.segments.push_back(Segment::fixed(" "));
    m.segments.push_back(Segment::slot(set_id));
  }
  m.segments.push_back(Segment::fixed(" {question}\n{choices}"));
  return m;
}

inline TreeNode leaf_node(const std::string& id, std::size_t meta_index) {
  TreeNode n;
  n.id = id;
  n.level = kLeafLevel;
  n.label = id;
  n.meta = meta_index;
  return n;
}

inline TreeNode inner_node(const std::string& id, int level, const std::string& label,
                           std::vector<TreeNode> children) {
  TreeNode n;
  n.id = id;
  n.level = level;
  n.label = label;
  n.children = std::move(children);
  return n;
}

struct Toy {
  Grammar grammar;
  WeightedTree tree;
};

// Builds root -> one chain per leaf (declarative/simple/subject-predicate)
// with each leaf's meta sized by `leaf_sizes[i]`.
inline Toy chain_toy(const std::vector<std::vector<std::size_t>>& leaf_sizes) {
  Toy t;
  for (std::size_t i = 0; i < leaf_sizes.size(); ++i) {
    const std::string id = "leaf" + std::to_string(i);
    t.grammar.meta_templates.push_back(sized_meta(t.grammar, id, leaf_sizes[i]));
    const std::string p = "n" + std::to_string(i);
    t.tree.root.children.push_back(inner_node(
        p + "/l1", 1, i % 2 ? "imperative" : "declarative",
        {inner_node(p + "/l2", 2, "simple",
                    {inner_node(p + "/l3", 3, "subject-predicate", {leaf_node(id, i)})})}));
  }
  return t;
}

// The toy space used across the tests: leaf A with one template, leaf B with
// three, A first in depth-first order.
inline Toy toy_a1_b3() {
  Toy t;
  t.grammar.synonym_sets["b"] = {"b", {"x", "y", "z"}};
  t.grammar.meta_templates.push_back({"A", {Segment::fixed("A: {question} {choices}")}});
  t.grammar.meta_templates.push_back(
      {"B", {Segment::fixed("B "), Segment::slot("b"), Segment::fixed(": {question} {choices}")}});
  t.tree.root.children.push_back(inner_node(
      "decl", 1, "declarative",
      {inner_node("decl/simple", 2, "simple",
                  {inner_node("decl/simple/sp", 3, "subject-predicate", {leaf_node("A", 0)})})}));
  t.tree.root.children.push_back(inner_node(
      "imp", 1, "imperative",
      {inner_node("imp/simple", 2, "simple",
                  {inner_node("imp/simple/spo", 3, "subject-predicate-object", {leaf_node("B", 1)})})}));
  return t;
}

// Random valid tree: 1-2 level-1 nodes, 1-3 children per internal node,
// metas with 0-3 slots of size 1-4.
inline Toy random_toy(std::mt19937_64& rng) {
  auto pick = [&](std::size_t lo, std::size_t hi) {
    return lo + static_cast<std::size_t>(rng() % (hi - lo + 1));
  };
  Toy t;
  std::size_t counter = 0;
  std::function<TreeNode(int, std::string)> build = [&](int level, std::string prefix) {
    if (level == kLeafLevel) {
      std::vector<std::size_t> sizes(pick(0, 3));
      for (auto& s : sizes) s = pick(1, 4);
      const std::string id = "m" + std::to_string(counter++);
      t.grammar.meta_templates.push_back(sized_meta(t.grammar, id, sizes));
      return leaf_node(id, t.grammar.meta_templates.size() - 1);
    }
    const auto& labels = taxonomy_labels(level);
    std::vector<TreeNode> kids;
    const std::size_t n = pick(1, 3);
    for (std::size_t i = 0; i < n; ++i) {
      kids.push_back(build(level + 1, prefix + "/" + std::to_string(i)));
    }
    return inner_node(prefix, level, std::string(labels[rng() % labels.size()]), std::move(kids));
  };
  const std::size_t roots = pick(1, 2);
  for (std::size_t i = 0; i < roots; ++i) t.tree.root.children.push_back(build(1, "r" + std::to_string(i)));
  return t;
}

}  // namespace tmplgen::testing

#include <boost/math/distributions/chi_squared.hpp>

namespace tmplgen::testing {

// Pearson statistic of `observed` against a uniform expectation.
inline double chi_square_uniform(const std::vector<std::size_t>& observed) {
  std::size_t n = 0;
  for (auto o : observed) n += o;
  const double expected = static_cast<double>(n) / static_cast<double>(observed.size());
  double stat = 0;
  for (auto o : observed) {
    const double d = static_cast<double>(o) - expected;
    stat += d * d / expected;
  }
  return stat;
}

// Upper critical value: P(X > value) = alpha for X ~ chi2(df).
inline double chi_square_critical(std::size_t df, double alpha) {
  boost::math::chi_squared dist(static_cast<double>(df));
  return boost::math::quantile(boost::math::complement(dist, alpha));
}

}  // namespace tmplgen::testing

#include "tmplgen/grammar_io.hpp"
#include "tmplgen/sampler.hpp"

namespace tmplgen::testing {

// Template strings sampled from the shipped grammar.
inline std::vector<std::string> load_default_templates(Count k, std::uint64_t seed) {
  const auto bundle = load_checked(default_grammar_path());
  std::vector<std::string> out;
  for (const auto& r : sample_distinct(bundle.tree, bundle.grammar, k, seed).records) out.push_back(r.text);
  return out;
}

}  // namespace tmplgen::testing
