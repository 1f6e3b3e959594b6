// Copyright (C) 2026 The tmplgen Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "tmplgen/error.hpp"
#include "tmplgen/grammar.hpp"
#include "tmplgen/pattern_tree.hpp"

namespace tmplgen {

// A grammar file decoded into its synonym sets, its meta templates (in
// depth-first leaf order) and the pattern tree that references them.
struct GrammarBundle {
  Grammar grammar;
  WeightedTree tree;
  // Unknown keys skipped in lenient mode.
  std::vector<std::string> warnings;
};

struct LoadOptions {
  bool strict = false;
};

namespace detail {

class GrammarParser {
 public:
  explicit GrammarParser(const LoadOptions& opts) : opts_(opts) {}

  GrammarBundle parse(const nlohmann::json& doc) {
    if (!doc.is_object()) fail("grammar root must be a JSON object");
    check_keys(doc, {"synonym_sets", "tree"}, "grammar root");
    if (!doc.contains("synonym_sets")) fail("grammar root: missing 'synonym_sets'");
    if (!doc.contains("tree")) fail("grammar root: missing 'tree'");

    const auto& sets = doc.at("synonym_sets");
    if (!sets.is_object()) fail("'synonym_sets' must be an object of id -> array");
    for (const auto& [id, candidates] : sets.items()) {
      if (!candidates.is_array()) fail("synonym set '" + id + "' must be an array");
      SynonymSet set{id, {}};
      for (const auto& c : candidates) {
        if (!c.is_string()) fail("synonym set '" + id + "': candidates must be strings");
        set.candidates.push_back(c.get<std::string>());
      }
      bundle_.grammar.synonym_sets.emplace(id, std::move(set));
    }

    const auto& tree = doc.at("tree");
    if (!tree.is_array()) fail("'tree' must be an array of level-1 nodes");
    for (const auto& node : tree) {
      bundle_.tree.root.children.push_back(parse_node(node, 1));
    }
    return std::move(bundle_);
  }

 private:
  [[noreturn]] static void fail(const std::string& what) { throw ValidationError(what); }

  void check_keys(const nlohmann::json& obj, std::initializer_list<std::string_view> known,
                  const std::string& where) {
    for (const auto& [key, _] : obj.items()) {
      bool ok = false;
      for (auto k : known) ok = ok || k == key;
      if (ok) continue;
      const std::string msg = where + ": unknown key '" + key + "'";
      if (opts_.strict) fail(msg);
      bundle_.warnings.push_back(msg);
    }
  }

  static std::string string_field(const nlohmann::json& obj, const char* key,
                                  const std::string& where) {
    if (!obj.contains(key) || !obj.at(key).is_string()) {
      fail(where + ": missing string field '" + key + "'");
    }
    return obj.at(key).get<std::string>();
  }

  TreeNode parse_node(const nlohmann::json& obj, int depth) {
    if (!obj.is_object()) fail("tree node at depth " + std::to_string(depth) + " is not an object");
    TreeNode node;
    node.level = depth;
    node.id = string_field(obj, "id", "tree node at depth " + std::to_string(depth));
    const std::string where = "tree node '" + node.id + "'";

    if (obj.contains("segments")) {
      check_keys(obj, {"id", "label", "segments"}, where);
      node.label = obj.contains("label") ? string_field(obj, "label", where) : node.id;
      node.meta = bundle_.grammar.meta_templates.size();
      bundle_.grammar.meta_templates.push_back(parse_meta(obj, node.id));
      return node;
    }

    check_keys(obj, {"id", "label", "level", "children"}, where);
    node.label = string_field(obj, "label", where);
    if (obj.contains("level") &&
        (!obj.at("level").is_number_integer() || obj.at("level").get<int>() != depth)) {
      fail(where + ": declared level does not match its depth " + std::to_string(depth));
    }
    if (obj.contains("children")) {
      if (!obj.at("children").is_array()) fail(where + ": 'children' must be an array");
      for (const auto& child : obj.at("children")) {
        node.children.push_back(parse_node(child, depth + 1));
      }
    }
    return node;
  }

  MetaTemplate parse_meta(const nlohmann::json& obj, const std::string& id) {
    const std::string where = "meta '" + id + "'";
    const auto& segs = obj.at("segments");
    if (!segs.is_array()) fail(where + ": 'segments' must be an array");
    MetaTemplate meta{id, {}};
    for (const auto& seg : segs) {
      if (!seg.is_object() || seg.size() != 1) {
        fail(where + ": each segment must be {\"fixed\": str} or {\"slot\": str}");
      }
      if (seg.contains("fixed") && seg.at("fixed").is_string()) {
        meta.segments.push_back(Segment::fixed(seg.at("fixed").get<std::string>()));
      } else if (seg.contains("slot") && seg.at("slot").is_string()) {
        meta.segments.push_back(Segment::slot(seg.at("slot").get<std::string>()));
      } else {
        fail(where + ": each segment must be {\"fixed\": str} or {\"slot\": str}");
      }
    }
    return meta;
  }

  LoadOptions opts_;
  GrammarBundle bundle_;
};

inline nlohmann::json node_to_json(const TreeNode& node, const Grammar& grammar) {
  if (node.meta) {
    nlohmann::json segs = nlohmann::json::array();
    for (const auto& s : grammar.meta_templates.at(*node.meta).segments) {
      segs.push_back(s.is_slot() ? nlohmann::json{{"slot", s.text}}
                                 : nlohmann::json{{"fixed", s.text}});
    }
    nlohmann::json leaf{{"id", grammar.meta_templates.at(*node.meta).id},
                        {"segments", std::move(segs)}};
    if (node.label != node.id) leaf["label"] = node.label;
    return leaf;
  }
  nlohmann::json children = nlohmann::json::array();
  for (const auto& c : node.children) children.push_back(node_to_json(c, grammar));
  return {{"id", node.id}, {"label", node.label}, {"children", std::move(children)}};
}

}  // namespace detail

inline GrammarBundle parse_grammar(const nlohmann::json& doc, const LoadOptions& opts = {}) {
  return detail::GrammarParser(opts).parse(doc);
}

inline GrammarBundle parse_grammar(const std::string& text, const LoadOptions& opts = {}) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw IoError(std::string("grammar is not valid JSON: ") + e.what());
  }
  return parse_grammar(doc, opts);
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("error reading '" + path.string() + "'");
  return ss.str();
}

inline GrammarBundle load_grammar(const std::filesystem::path& path,
                                  const LoadOptions& opts = {}) {
  return parse_grammar(read_file(path), opts);
}

inline nlohmann::json grammar_to_json(const Grammar& grammar, const WeightedTree& tree) {
  nlohmann::json sets = nlohmann::json::object();
  for (const auto& [id, set] : grammar.synonym_sets) sets[id] = set.candidates;
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& c : tree.root.children) nodes.push_back(detail::node_to_json(c, grammar));
  return {{"synonym_sets", std::move(sets)}, {"tree", std::move(nodes)}};
}

// Loads, validates and accumulates in one step; throws ValidationError or
// StructureError carrying the first diagnostic.
inline GrammarBundle load_checked(const std::filesystem::path& path, const LoadOptions& opts = {}) {
  GrammarBundle bundle = load_grammar(path, opts);
  ValidateOptions vopts;
  vopts.strict = opts.strict;
  for (const auto& d : validate_grammar(bundle.grammar, vopts)) {
    if (d.is_error()) throw ValidationError(d.to_string());
  }
  accumulate_weights_in_place(bundle.tree, bundle.grammar);
  return bundle;
}

}  // namespace tmplgen
