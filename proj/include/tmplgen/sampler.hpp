// Copyright (C) 2026 The tmplgen Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "json.hpp"
#include "tmplgen/error.hpp"
#include "tmplgen/grammar.hpp"
#include "tmplgen/pattern_tree.hpp"
#include "tmplgen/random.hpp"

namespace tmplgen {

struct TemplateSet {
  Count scale = 0;
  std::uint64_t seed = 0;
  Count total = 0;
  std::vector<TemplateRecord> records;
};

// The record with the given global index. Descends on node offsets to the
// unique leaf whose [offset, offset + weight) interval contains the index,
// then decodes the remainder as a mixed-radix choice vector.
inline TemplateRecord template_at(const WeightedTree& tree, const Grammar& grammar,
                                  Count global_index) {
  const Count total = total_count(tree);
  if (global_index >= total) {
    throw BoundsError("global index " + std::to_string(global_index) +
                      " outside [0, " + std::to_string(total) + ")");
  }
  const TreeNode* node = &tree.root;
  std::vector<std::string> path;
  while (!node->is_leaf()) {
    const auto& kids = node->children;
    // Last child whose offset is <= global_index.
    auto it = std::upper_bound(kids.begin(), kids.end(), global_index,
                               [](Count v, const TreeNode& c) { return v < c.offset; });
    node = &*std::prev(it);
    path.push_back(node->id);
  }
  const MetaTemplate& meta = grammar.meta_templates[*node->meta];
  auto choices = index_to_choices(meta, global_index - node->offset, grammar);
  return detail::make_record(*node, std::move(path), std::move(choices), grammar);
}

// Inverse of template_at: recomputes the global index from a record's leaf
// path and choice vector.
inline Count index_of(const WeightedTree& tree, const Grammar& grammar,
                      const TemplateRecord& record) {
  total_count(tree);
  const TreeNode* node = &tree.root;
  for (const auto& id : record.leaf_path) {
    const TreeNode* next = nullptr;
    for (const auto& c : node->children) {
      if (c.id == id) next = &c;
    }
    if (next == nullptr) {
      throw BoundsError("leaf path step '" + id + "' not found under '" + node->id + "'");
    }
    node = next;
  }
  if (!node->is_leaf() || !node->meta) {
    throw BoundsError("leaf path does not end at a leaf");
  }
  return node->offset +
         choices_to_index(grammar.meta_templates[*node->meta], record.choices, grammar);
}

namespace detail {

inline void check_scale(Count k, Count total) {
  if (k == 0) throw CapacityError("scale must be at least 1");
  if (k > total) {
    throw CapacityError("requested " + std::to_string(k) +
                        " distinct templates but the space holds only " +
                        std::to_string(total));
  }
}

inline TemplateSet materialize(const WeightedTree& tree, const Grammar& grammar,
                               const std::vector<Count>& indices, std::uint64_t seed) {
  TemplateSet set;
  set.scale = indices.size();
  set.seed = seed;
  set.total = tree.total;
  set.records.reserve(indices.size());
  for (Count i : indices) set.records.push_back(template_at(tree, grammar, i));
  return set;
}

}  // namespace detail

// K distinct indices drawn uniformly without replacement from [0, total)
// (Floyd's algorithm), returned in a uniformly shuffled order.
inline std::vector<Count> distinct_indices(Count total, Count k, std::uint64_t seed) {
  detail::check_scale(k, total);
  Rng rng = make_rng(seed);
  std::unordered_set<Count> chosen;
  chosen.reserve(static_cast<std::size_t>(k) * 2);
  std::vector<Count> order;
  order.reserve(static_cast<std::size_t>(k));
  for (Count j = total - k; j < total; ++j) {
    const Count t = uniform_below(rng, j + 1);
    const Count pick = chosen.insert(t).second ? t : j;
    if (pick == j) chosen.insert(j);
    order.push_back(pick);
  }
  for (std::size_t i = order.size(); i > 1; --i) {
    std::swap(order[i - 1], order[uniform_below(rng, i)]);
  }
  return order;
}

// First K entries of a seeded uniform permutation of [0, total), via a
// sparse Fisher-Yates shuffle. A smaller K with the same seed yields a
// prefix of a larger one.
inline std::vector<Count> permutation_prefix(Count total, Count k, std::uint64_t seed) {
  detail::check_scale(k, total);
  Rng rng = make_rng(seed);
  std::unordered_map<Count, Count> displaced;
  auto value_at = [&](Count i) {
    auto it = displaced.find(i);
    return it == displaced.end() ? i : it->second;
  };
  std::vector<Count> out;
  out.reserve(static_cast<std::size_t>(k));
  for (Count i = 0; i < k; ++i) {
    const Count j = i + uniform_below(rng, total - i);
    const Count vi = value_at(i);
    const Count vj = value_at(j);
    displaced[j] = vi;
    out.push_back(vj);
  }
  return out;
}

// K distinct templates, uniform without replacement over the whole space.
inline TemplateSet sample_distinct(const WeightedTree& tree, const Grammar& grammar,
                                   Count k, std::uint64_t seed) {
  const Count total = total_count(tree);
  return detail::materialize(tree, grammar, distinct_indices(total, k, seed), seed);
}

// Like sample_distinct, but sets drawn with one seed are nested across scales.
inline TemplateSet sample_nested(const WeightedTree& tree, const Grammar& grammar,
                                 Count k, std::uint64_t seed) {
  const Count total = total_count(tree);
  return detail::materialize(tree, grammar, permutation_prefix(total, k, seed), seed);
}

// ---------------------------------------------------------------------------
// File format: a header line {"scale","seed","total"} then one record per line.

inline void write_template_set(std::ostream& out, const TemplateSet& set) {
  out << nlohmann::json{{"scale", set.scale}, {"seed", set.seed}, {"total", set.total}}.dump()
      << '\n';
  for (const auto& r : set.records) out << to_json(r).dump() << '\n';
}

inline TemplateSet read_template_set(std::istream& in) {
  TemplateSet set;
  std::string line;
  bool header = false;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw IoError("template set line " + std::to_string(lineno) + ": " + e.what());
    }
    if (!header) {
      if (!j.is_object() || !j.contains("scale") || !j.contains("total")) {
        throw IoError("template set is missing its header line");
      }
      set.scale = j.at("scale").get<Count>();
      set.seed = j.value("seed", std::uint64_t{0});
      set.total = j.at("total").get<Count>();
      header = true;
      continue;
    }
    set.records.push_back(record_from_json(j));
  }
  if (!header) throw IoError("template set is empty");
  if (set.records.size() != set.scale) {
    throw IoError("template set header declares " + std::to_string(set.scale) +
                  " records but the file holds " + std::to_string(set.records.size()));
  }
  return set;
}

inline TemplateSet load_template_set(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  return read_template_set(in);
}

}  // namespace tmplgen
