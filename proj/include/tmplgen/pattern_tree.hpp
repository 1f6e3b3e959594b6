// Copyright (C) 2026 The tmplgen Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"
#include "tmplgen/error.hpp"
#include "tmplgen/grammar.hpp"
#include "tmplgen/random.hpp"

namespace tmplgen {

// Depth of the sentence-pattern taxonomy. Level 0 is a synthetic root over
// the level-1 split; level 4 holds the meta templates.
inline constexpr int kLeafLevel = 4;

inline const std::vector<std::string_view>& taxonomy_labels(int level) {
  static const std::array<std::vector<std::string_view>, 3> labels{{
      {"declarative", "imperative"},
      {"simple", "complex", "compound"},
      {"subject-predicate", "subject-predicate-object", "subject-subject",
       "noun clause", "gerund clause", "linking clause"},
  }};
  static const std::vector<std::string_view> none;
  return level >= 1 && level <= 3 ? labels[level - 1] : none;
}

struct TreeNode {
  std::string id;
  int level = 0;
  std::string label;
  std::vector<TreeNode> children;
  // Index into Grammar::meta_templates; set iff level == 4.
  std::optional<std::size_t> meta;
  // Number of templates under this node once accumulated.
  Count weight = 0;
  // Global index of the first template under this node, depth-first.
  Count offset = 0;

  bool is_leaf() const { return children.empty(); }
};

struct WeightedTree {
  TreeNode root{"root", 0, "root", {}, std::nullopt, 0, 0};
  bool accumulated = false;
  Count total = 0;
};

// One rendered template plus where it came from.
struct TemplateRecord {
  Count global_index = 0;
  std::string text;
  // Node ids from level 1 down to the leaf.
  std::vector<std::string> leaf_path;
  std::vector<std::size_t> choices;

  friend bool operator==(const TemplateRecord&, const TemplateRecord&) = default;
};

inline nlohmann::json to_json(const TemplateRecord& r) {
  return nlohmann::json{{"index", r.global_index},
                        {"template", r.text},
                        {"leaf_path", r.leaf_path},
                        {"choices", r.choices}};
}

inline TemplateRecord record_from_json(const nlohmann::json& j) {
  try {
    TemplateRecord r;
    r.global_index = j.at("index").get<Count>();
    r.text = j.at("template").get<std::string>();
    r.leaf_path = j.at("leaf_path").get<std::vector<std::string>>();
    r.choices = j.at("choices").get<std::vector<std::size_t>>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed template record: ") + e.what());
  }
}

// Structural problems of `tree` against `grammar`, one per violation.
inline std::vector<Diagnostic> check_structure(const WeightedTree& tree,
                                               const Grammar& grammar) {
  std::vector<Diagnostic> diags;
  auto error = [&](const TreeNode& node, std::string reason) {
    diags.push_back({Diagnostic::Severity::kError, "node '" + node.id + "'",
                     std::move(reason)});
  };
  std::set<std::string> ids;
  std::vector<int> meta_uses(grammar.meta_count(), 0);

  if (tree.root.children.empty()) error(tree.root, "tree has no level-1 nodes");

  std::vector<const TreeNode*> stack{&tree.root};
  while (!stack.empty()) {
    const TreeNode& node = *stack.back();
    stack.pop_back();
    if (!ids.insert(node.id).second) error(node, "duplicate node id");

    if (node.level >= 1 && node.level <= 3) {
      const auto& allowed = taxonomy_labels(node.level);
      bool known = false;
      for (auto l : allowed) known = known || l == node.label;
      if (!known) {
        error(node, "label '" + node.label + "' is not a level-" +
                        std::to_string(node.level) + " sentence pattern");
      }
    }
    if (node.level == kLeafLevel) {
      if (!node.children.empty()) error(node, "level-4 node has children");
      if (!node.meta) {
        error(node, "leaf carries no meta template");
      } else if (*node.meta >= grammar.meta_count()) {
        error(node, "meta template index out of range");
      } else {
        ++meta_uses[*node.meta];
      }
    } else {
      if (node.meta) error(node, "meta template above level 4");
      if (node.children.empty()) {
        error(node, "level-" + std::to_string(node.level) +
                        " node has no children; leaves must sit at level 4");
      }
    }
    for (const auto& child : node.children) {
      if (child.level != node.level + 1) {
        error(child, "level " + std::to_string(child.level) + " under a level-" +
                         std::to_string(node.level) + " parent");
      }
      stack.push_back(&child);
    }
  }
  for (std::size_t i = 0; i < meta_uses.size(); ++i) {
    if (meta_uses[i] != 1) {
      diags.push_back({Diagnostic::Severity::kError,
                       "meta '" + grammar.meta_templates[i].id + "'",
                       "appears in " + std::to_string(meta_uses[i]) +
                           " leaves, expected exactly one"});
    }
  }
  return diags;
}

// Sets every leaf weight to its meta's template count and every internal
// weight to the sum over its children, bottom-up. Weights are recomputed
// from scratch, so calling this again is a no-op.
inline void accumulate_weights_in_place(WeightedTree& tree, const Grammar& grammar) {
  const auto diags = check_structure(tree, grammar);
  if (has_errors(diags)) throw StructureError(diags.front().to_string());

  // Pre-order listing; walking it backwards visits children before parents.
  std::vector<TreeNode*> order{&tree.root};
  for (std::size_t i = 0; i < order.size(); ++i) {
    for (auto& child : order[i]->children) order.push_back(&child);
  }
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    TreeNode& node = **it;
    if (node.is_leaf()) {
      node.weight = count_templates(grammar.meta_templates[*node.meta], grammar);
      continue;
    }
    node.weight = 0;
    for (const auto& child : node.children) {
      if (node.weight > std::numeric_limits<Count>::max() - child.weight) {
        throw CapacityError("node '" + node.id + "': weight overflows 64 bits");
      }
      node.weight += child.weight;
    }
  }
  // Offsets top-down: a child starts where its preceding siblings end.
  tree.root.offset = 0;
  for (TreeNode* node : order) {
    Count next = node->offset;
    for (auto& child : node->children) {
      child.offset = next;
      next += child.weight;
    }
  }
  tree.total = tree.root.weight;
  tree.accumulated = true;
}

inline WeightedTree accumulate_weights(WeightedTree tree, const Grammar& grammar) {
  accumulate_weights_in_place(tree, grammar);
  return tree;
}

inline Count total_count(const WeightedTree& tree) {
  if (!tree.accumulated) throw StateError("tree weights have not been accumulated");
  return tree.total;
}

// Leaves in depth-first order, i.e. in increasing offset order.
inline std::vector<const TreeNode*> leaves(const WeightedTree& tree) {
  std::vector<const TreeNode*> out;
  std::vector<const TreeNode*> stack{&tree.root};
  while (!stack.empty()) {
    const TreeNode* node = stack.back();
    stack.pop_back();
    if (node->level == kLeafLevel) {
      out.push_back(node);
      continue;
    }
    for (auto it = node->children.rbegin(); it != node->children.rend(); ++it) {
      stack.push_back(&*it);
    }
  }
  return out;
}

namespace detail {

inline void require_sampleable(const WeightedTree& tree) {
  if (total_count(tree) == 0) throw CapacityError("template space is empty");
}

inline TemplateRecord make_record(const TreeNode& leaf,
                                  std::vector<std::string> path,
                                  std::vector<std::size_t> choices,
                                  const Grammar& grammar) {
  const MetaTemplate& meta = grammar.meta_templates[*leaf.meta];
  TemplateRecord r;
  r.global_index = leaf.offset + choices_to_index(meta, choices, grammar);
  r.text = render(meta, choices, grammar);
  r.leaf_path = std::move(path);
  r.choices = std::move(choices);
  return r;
}

}  // namespace detail

// Draws one template: at each level picks a child with probability
// weight(child) / weight(parent), then fills each slot of the leaf's meta
// with an independent uniformly chosen synonym. Every template in the space
// is drawn with probability exactly 1 / total.
inline TemplateRecord sample_template(const WeightedTree& tree,
                                      const Grammar& grammar, Rng& rng) {
  detail::require_sampleable(tree);
  const TreeNode* node = &tree.root;
  std::vector<std::string> path;
  while (!node->is_leaf()) {
    // Cumulative-sum inversion over integer weights.
    Count r = uniform_below(rng, node->weight);
    const TreeNode* next = nullptr;
    for (const auto& child : node->children) {
      if (r < child.weight) {
        next = &child;
        break;
      }
      r -= child.weight;
    }
    node = next;
    path.push_back(node->id);
  }
  const MetaTemplate& meta = grammar.meta_templates[*node->meta];
  std::vector<std::size_t> choices;
  for (Count radix : slot_radices(meta, grammar)) {
    choices.push_back(static_cast<std::size_t>(uniform_below(rng, radix)));
  }
  return detail::make_record(*node, std::move(path), std::move(choices), grammar);
}

}  // namespace tmplgen
