// Copyright (C) 2026 The tmplgen Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "tmplgen/error.hpp"
#include "tmplgen/random.hpp"

namespace tmplgen {

// Size of a template space. Products are overflow-checked.
using Count = std::uint64_t;

// Data slots left in every rendered template and filled later with corpus or
// benchmark content.
inline constexpr std::string_view kQuestionSlot = "{question}";
inline constexpr std::string_view kChoicesSlot = "{choices}";

inline std::size_t count_occurrences(std::string_view haystack,
                                     std::string_view needle) {
  if (needle.empty()) return 0;
  std::size_t n = 0;
  for (auto pos = haystack.find(needle); pos != std::string_view::npos;
       pos = haystack.find(needle, pos + needle.size())) {
    ++n;
  }
  return n;
}

// Ordered candidates for one slot. Candidate order is the digit meaning of
// the mixed-radix index, so it must never be re-sorted.
struct SynonymSet {
  std::string id;
  std::vector<std::string> candidates;

  std::size_t size() const { return candidates.size(); }
};

struct Segment {
  enum class Kind { kFixed, kSlot };

  Kind kind = Kind::kFixed;
  // Literal text for kFixed; synonym-set id for kSlot.
  std::string text;

  static Segment fixed(std::string text) {
    return Segment{Kind::kFixed, std::move(text)};
  }
  static Segment slot(std::string set_id) {
    return Segment{Kind::kSlot, std::move(set_id)};
  }

  bool is_slot() const { return kind == Kind::kSlot; }

  friend bool operator==(const Segment&, const Segment&) = default;
};

struct MetaTemplate {
  std::string id;
  std::vector<Segment> segments;

  std::size_t slot_count() const {
    std::size_t n = 0;
    for (const auto& s : segments) n += s.is_slot() ? 1 : 0;
    return n;
  }
};

struct Grammar {
  std::map<std::string, SynonymSet> synonym_sets;
  std::vector<MetaTemplate> meta_templates;

  std::size_t meta_count() const { return meta_templates.size(); }

  const SynonymSet* find_set(std::string_view id) const {
    auto it = synonym_sets.find(std::string(id));
    return it == synonym_sets.end() ? nullptr : &it->second;
  }

  const MetaTemplate* find_meta(std::string_view id) const {
    for (const auto& m : meta_templates) {
      if (m.id == id) return &m;
    }
    return nullptr;
  }
};

// Synonym-set sizes of the slots of `meta`, in slot order.
inline std::vector<Count> slot_radices(const MetaTemplate& meta,
                                       const Grammar& grammar) {
  std::vector<Count> radices;
  radices.reserve(meta.segments.size());
  for (const auto& seg : meta.segments) {
    if (!seg.is_slot()) continue;
    const SynonymSet* set = grammar.find_set(seg.text);
    if (set == nullptr) {
      throw ValidationError("meta '" + meta.id +
                            "': unresolved synonym set '" + seg.text + "'");
    }
    if (set->candidates.empty()) {
      throw ValidationError("meta '" + meta.id + "': synonym set '" +
                            seg.text + "' is empty");
    }
    radices.push_back(set->size());
  }
  return radices;
}

// Number of distinct templates `meta` can produce: the product of its slot
// synonym-set sizes, 1 for a slot-free meta.
inline Count count_templates(const MetaTemplate& meta, const Grammar& grammar) {
  Count total = 1;
  for (Count r : slot_radices(meta, grammar)) {
    if (total > std::numeric_limits<Count>::max() / r) {
      throw CapacityError("meta '" + meta.id +
                          "': template count overflows 64 bits");
    }
    total *= r;
  }
  return total;
}

inline std::string render(const MetaTemplate& meta,
                          const std::vector<std::size_t>& choices,
                          const Grammar& grammar) {
  if (choices.size() != meta.slot_count()) {
    throw BoundsError("meta '" + meta.id + "': expected " +
                      std::to_string(meta.slot_count()) +
                      " choices, got " + std::to_string(choices.size()));
  }
  std::string out;
  std::size_t slot = 0;
  for (const auto& seg : meta.segments) {
    if (!seg.is_slot()) {
      out += seg.text;
      continue;
    }
    const SynonymSet* set = grammar.find_set(seg.text);
    if (set == nullptr) {
      throw ValidationError("meta '" + meta.id +
                            "': unresolved synonym set '" + seg.text + "'");
    }
    if (choices[slot] >= set->size()) {
      throw BoundsError("meta '" + meta.id + "': slot position " +
                        std::to_string(slot) + " index " +
                        std::to_string(choices[slot]) + " outside [0, " +
                        std::to_string(set->size()) + ")");
    }
    out += set->candidates[choices[slot]];
    ++slot;
  }
  return out;
}

// Mixed-radix decode with the last slot as the fastest digit.
inline std::vector<std::size_t> index_to_choices(const MetaTemplate& meta,
                                                 Count local_index,
                                                 const Grammar& grammar) {
  const auto radices = slot_radices(meta, grammar);
  const Count total = count_templates(meta, grammar);
  if (local_index >= total) {
    throw BoundsError("meta '" + meta.id + "': local index " +
                      std::to_string(local_index) + " outside [0, " +
                      std::to_string(total) + ")");
  }
  std::vector<std::size_t> choices(radices.size());
  for (std::size_t j = radices.size(); j-- > 0;) {
    choices[j] = static_cast<std::size_t>(local_index % radices[j]);
    local_index /= radices[j];
  }
  return choices;
}

inline Count choices_to_index(const MetaTemplate& meta,
                              const std::vector<std::size_t>& choices,
                              const Grammar& grammar) {
  const auto radices = slot_radices(meta, grammar);
  if (choices.size() != radices.size()) {
    throw BoundsError("meta '" + meta.id + "': expected " +
                      std::to_string(radices.size()) + " choices, got " +
                      std::to_string(choices.size()));
  }
  Count index = 0;
  for (std::size_t j = 0; j < radices.size(); ++j) {
    if (choices[j] >= radices[j]) {
      throw BoundsError("meta '" + meta.id + "': slot position " +
                        std::to_string(j) + " index " +
                        std::to_string(choices[j]) + " outside [0, " +
                        std::to_string(radices[j]) + ")");
    }
    index = index * radices[j] + choices[j];
  }
  return index;
}

// Visits every rendering of `meta` in mixed-radix order. Refuses to start
// when the count exceeds `cap`.
inline void for_each_template(
    const MetaTemplate& meta, const Grammar& grammar, Count cap,
    const std::function<void(Count, const std::string&)>& visit) {
  const Count total = count_templates(meta, grammar);
  if (total > cap) {
    throw CapacityError("meta '" + meta.id + "' has " +
                        std::to_string(total) +
                        " templates, above the enumeration cap of " +
                        std::to_string(cap));
  }
  const auto radices = slot_radices(meta, grammar);
  std::vector<std::size_t> choices(radices.size(), 0);
  for (Count i = 0; i < total; ++i) {
    visit(i, render(meta, choices, grammar));
    // Odometer increment, last digit fastest.
    for (std::size_t j = radices.size(); j-- > 0;) {
      if (++choices[j] < radices[j]) break;
      choices[j] = 0;
    }
  }
}

inline std::vector<std::pair<Count, std::string>> enumerate_templates(
    const MetaTemplate& meta, const Grammar& grammar, Count cap) {
  std::vector<std::pair<Count, std::string>> out;
  for_each_template(meta, grammar, cap,
                    [&](Count i, const std::string& s) { out.emplace_back(i, s); });
  return out;
}

// ---------------------------------------------------------------------------
// Validation

struct Diagnostic {
  enum class Severity { kWarning, kError };

  Severity severity = Severity::kError;
  std::string subject;  // e.g. "meta 'm3'" or "synonym set 'verb'"
  std::string reason;

  bool is_error() const { return severity == Severity::kError; }

  std::string to_string() const {
    return std::string(is_error() ? "error: " : "warning: ") + subject + ": " +
           reason;
  }
};

struct ValidateOptions {
  // Orphan synonym sets become errors instead of warnings.
  bool strict = false;
  // Metas at or below this count are checked for collisions exhaustively;
  // larger ones by a seeded spot check of `spot_check_samples` indices.
  Count exhaustive_collision_limit = 100'000;
  std::size_t spot_check_samples = 20'000;
};

inline bool has_errors(const std::vector<Diagnostic>& diags) {
  for (const auto& d : diags) {
    if (d.is_error()) return true;
  }
  return false;
}

namespace detail {

// Returns a description of the first collision found, or an empty string.
inline std::string find_collision(const MetaTemplate& meta,
                                  const Grammar& grammar, Count total,
                                  const ValidateOptions& opts) {
  std::unordered_map<std::string, Count> seen;
  auto check = [&](Count index, std::string rendered) -> std::string {
    auto [it, inserted] = seen.emplace(std::move(rendered), index);
    if (inserted || it->second == index) return {};
    return "local indices " + std::to_string(it->second) + " and " +
           std::to_string(index) + " both render \"" + it->first + "\"";
  };

  if (total <= opts.exhaustive_collision_limit) {
    std::string found;
    for_each_template(meta, grammar, total, [&](Count i, const std::string& s) {
      if (found.empty()) found = check(i, s);
    });
    return found;
  }
  Rng rng = make_rng(splitmix64(std::hash<std::string>{}(meta.id)));
  for (std::size_t n = 0; n < opts.spot_check_samples; ++n) {
    const Count i = uniform_below(rng, total);
    auto found = check(i, render(meta, index_to_choices(meta, i, grammar), grammar));
    if (!found.empty()) return found;
  }
  return {};
}

}  // namespace detail

// Checks every grammar invariant and returns one diagnostic per violation.
// Errors are the return value; nothing is thrown.
inline std::vector<Diagnostic> validate_grammar(const Grammar& grammar,
                                                const ValidateOptions& opts = {}) {
  using Severity = Diagnostic::Severity;
  std::vector<Diagnostic> diags;
  auto error = [&](std::string subject, std::string reason) {
    diags.push_back({Severity::kError, std::move(subject), std::move(reason)});
  };

  for (const auto& [id, set] : grammar.synonym_sets) {
    const std::string subject = "synonym set '" + id + "'";
    if (set.id != id) error(subject, "keyed under a different id '" + set.id + "'");
    if (set.candidates.empty()) error(subject, "has no candidates");
    std::set<std::string_view> unique;
    for (const auto& c : set.candidates) {
      if (!unique.insert(c).second) error(subject, "duplicate candidate \"" + c + "\"");
      if (count_occurrences(c, kQuestionSlot) + count_occurrences(c, kChoicesSlot) > 0) {
        error(subject, "candidate \"" + c + "\" contains a data slot");
      }
    }
  }

  if (grammar.meta_templates.empty()) error("grammar", "has no meta templates");

  std::set<std::string> referenced;
  std::unordered_map<std::string, int> id_seen;
  for (const auto& meta : grammar.meta_templates) {
    const std::string subject = "meta '" + meta.id + "'";
    if (++id_seen[meta.id] > 1) error(subject, "duplicate meta template id");

    bool resolved = true;
    bool sets_ok = true;
    std::size_t questions = 0;
    std::size_t choices = 0;
    for (const auto& seg : meta.segments) {
      if (seg.is_slot()) {
        referenced.insert(seg.text);
        const SynonymSet* set = grammar.find_set(seg.text);
        if (set == nullptr) {
          error(subject, "unresolved synonym set '" + seg.text + "'");
          resolved = false;
        } else if (set->candidates.empty()) {
          sets_ok = false;
        }
      } else {
        questions += count_occurrences(seg.text, kQuestionSlot);
        choices += count_occurrences(seg.text, kChoicesSlot);
      }
    }
    if (questions != 1) {
      error(subject, "data slot {question} appears " + std::to_string(questions) +
                         " times, expected exactly once");
    }
    if (choices != 1) {
      error(subject, "data slot {choices} appears " + std::to_string(choices) +
                         " times, expected exactly once");
    }
    if (!resolved || !sets_ok) continue;

    Count total = 0;
    try {
      total = count_templates(meta, grammar);
    } catch (const Error& e) {
      error(subject, e.what());
      continue;
    }
    const std::string collision = detail::find_collision(meta, grammar, total, opts);
    if (!collision.empty()) error(subject, "rendering collision: " + collision);
  }

  for (const auto& [id, set] : grammar.synonym_sets) {
    if (referenced.count(id) == 0) {
      diags.push_back({opts.strict ? Severity::kError : Severity::kWarning,
                       "synonym set '" + id + "'", "not referenced by any meta"});
    }
  }
  return diags;
}

}  // namespace tmplgen
