// Copyright (C) 2026 The tmplgen Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace tmplgen {

// Ranks answer options against a free-text model output. Higher is closer.
class SimilarityScorer {
 public:
  virtual ~SimilarityScorer() = default;
  virtual std::vector<double> score(std::string_view output,
                                    const std::vector<std::string>& choices) const = 0;
};

// Cosine similarity between lower-cased alphanumeric token multisets.
class LexicalScorer final : public SimilarityScorer {
 public:
  static std::map<std::string, double> tokens(std::string_view text) {
    std::map<std::string, double> counts;
    std::string cur;
    for (char ch : text) {
      const auto c = static_cast<unsigned char>(ch);
      if (std::isalnum(c)) {
        cur.push_back(static_cast<char>(std::tolower(c)));
      } else if (!cur.empty()) {
        counts[cur] += 1;
        cur.clear();
      }
    }
    if (!cur.empty()) counts[cur] += 1;
    return counts;
  }

  static double cosine(const std::map<std::string, double>& a,
                       const std::map<std::string, double>& b) {
    double dot = 0, na = 0, nb = 0;
    for (const auto& [tok, n] : a) {
      na += n * n;
      auto it = b.find(tok);
      if (it != b.end()) dot += n * it->second;
    }
    for (const auto& [tok, n] : b) nb += n * n;
    if (na == 0 || nb == 0) return 0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
  }

  std::vector<double> score(std::string_view output,
                            const std::vector<std::string>& choices) const override {
    const auto out = tokens(output);
    std::vector<double> scores;
    scores.reserve(choices.size());
    for (const auto& c : choices) scores.push_back(cosine(out, tokens(c)));
    return scores;
  }
};

enum class ExtractMethod { kMatch, kSimilarity };

// Which step decided the answer, finest first.
enum class ExtractRule {
  kIdentifierContent,  // "(A) cat"
  kIdentifier,         // "(A)", "A.", "A)" or a bare "A"
  kContent,            // "cat" as a whole word
  kSimilarity,
};

struct Extraction {
  std::size_t index = 0;
  ExtractMethod method = ExtractMethod::kSimilarity;
  ExtractRule rule = ExtractRule::kSimilarity;
};

inline const char* to_string(ExtractMethod m) {
  return m == ExtractMethod::kMatch ? "match" : "similarity";
}

namespace detail {

inline std::string_view trim_view(std::string_view s) {
  auto space = [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; };
  while (!s.empty() && space(s.front())) s.remove_prefix(1);
  while (!s.empty() && space(s.back())) s.remove_suffix(1);
  return s;
}

inline bool is_word_char(char ch) { return std::isalnum(static_cast<unsigned char>(ch)) != 0; }

inline std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& ch : out) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return out;
}

// True when `needle` occurs in `hay` at `pos` with word boundaries on both
// sides. An edge of the needle that is itself punctuation needs no boundary.
inline bool whole_word_at(std::string_view hay, std::size_t pos, std::string_view needle) {
  if (needle.empty() || hay.substr(pos, needle.size()) != needle) return false;
  const bool left_ok =
      pos == 0 || !is_word_char(hay[pos - 1]) || !is_word_char(needle.front());
  const std::size_t end = pos + needle.size();
  const bool right_ok =
      end == hay.size() || !is_word_char(hay[end]) || !is_word_char(needle.back());
  return left_ok && right_ok;
}

inline bool contains_whole_word(std::string_view hay, std::string_view needle) {
  if (needle.empty()) return false;
  for (auto pos = hay.find(needle); pos != std::string_view::npos; pos = hay.find(needle, pos + 1)) {
    if (whole_word_at(hay, pos, needle)) return true;
  }
  return false;
}

inline char letter(std::size_t i) { return static_cast<char>('A' + i); }

inline std::set<std::size_t> identifier_content_hits(std::string_view out,
                                                     const std::vector<std::string>& choices) {
  std::set<std::size_t> hits;
  const std::string low = lower(out);
  for (std::size_t i = 0; i < choices.size() && i < 26; ++i) {
    const std::string content = lower(trim_view(choices[i]));
    const std::string ident = std::string("(") + static_cast<char>('a' + i) + ")";
    for (auto pos = low.find(ident); pos != std::string::npos; pos = low.find(ident, pos + 1)) {
      std::size_t k = pos + ident.size();
      while (k < low.size() && (low[k] == ' ' || low[k] == '\t')) ++k;
      if (whole_word_at(low, k, content)) {
        hits.insert(i);
        break;
      }
    }
  }
  return hits;
}

inline std::set<std::size_t> identifier_hits(std::string_view out,
                                            const std::vector<std::string>& choices) {
  std::set<std::size_t> hits;
  const std::size_t n = choices.size() < 26 ? choices.size() : 26;
  for (std::size_t i = 0; i < n; ++i) {
    const char l = letter(i);
    for (std::size_t pos = out.find(l); pos != std::string_view::npos; pos = out.find(l, pos + 1)) {
      const bool paren = pos > 0 && out[pos - 1] == '(' && pos + 1 < out.size() && out[pos + 1] == ')';
      const bool left_free = pos == 0 || !is_word_char(out[pos - 1]);
      const bool suffixed = pos + 1 < out.size() && (out[pos + 1] == '.' || out[pos + 1] == ')');
      const bool right_free = pos + 2 >= out.size() || !is_word_char(out[pos + 2]);
      if (paren || (left_free && suffixed && right_free)) {
        hits.insert(i);
        break;
      }
    }
  }
  const std::string_view t = trim_view(out);
  if (t.size() == 1 && t[0] >= 'A' && static_cast<std::size_t>(t[0] - 'A') < n) {
    hits.insert(static_cast<std::size_t>(t[0] - 'A'));
  }
  return hits;
}

inline std::set<std::size_t> content_hits(std::string_view out,
                                          const std::vector<std::string>& choices) {
  std::set<std::size_t> hits;
  const std::string low = lower(out);
  for (std::size_t i = 0; i < choices.size(); ++i) {
    if (contains_whole_word(low, lower(trim_view(choices[i])))) hits.insert(i);
  }
  return hits;
}

}  // namespace detail

// Two-step answer extraction. Step one tries three string rules in order
// (identifier with content, identifier alone, content alone); the first rule
// that fires decides, and it must name exactly one option. Otherwise step
// two picks the option the scorer ranks highest, lowest index on ties.
class AnswerExtractor {
 public:
  AnswerExtractor() : scorer_(std::make_shared<LexicalScorer>()) {}
  explicit AnswerExtractor(std::shared_ptr<const SimilarityScorer> scorer)
      : scorer_(std::move(scorer)) {}

  Extraction extract(std::string_view output, const std::vector<std::string>& choices) const {
    if (choices.empty()) return {};
    const std::pair<ExtractRule, std::set<std::size_t> (*)(std::string_view,
                                                           const std::vector<std::string>&)>
        rules[] = {
            {ExtractRule::kIdentifierContent, &detail::identifier_content_hits},
            {ExtractRule::kIdentifier, &detail::identifier_hits},
            {ExtractRule::kContent, &detail::content_hits},
        };
    for (const auto& [rule, find_hits] : rules) {
      const auto hits = find_hits(output, choices);
      if (hits.empty()) continue;
      // Two different options matched: defer to similarity.
      if (hits.size() > 1) break;
      return {*hits.begin(), ExtractMethod::kMatch, rule};
    }
    return similarity(output, choices);
  }

  // Outputs that were empty (after trimming) when extracted.
  std::size_t empty_outputs() const { return empty_outputs_.load(); }

 private:
  Extraction similarity(std::string_view output, const std::vector<std::string>& choices) const {
    Extraction e{0, ExtractMethod::kSimilarity, ExtractRule::kSimilarity};
    if (detail::trim_view(output).empty()) {
      ++empty_outputs_;
      return e;
    }
    const auto scores = scorer_->score(output, choices);
    for (std::size_t i = 1; i < scores.size(); ++i) {
      if (scores[i] > scores[e.index]) e.index = i;
    }
    return e;
  }

  std::shared_ptr<const SimilarityScorer> scorer_;
  mutable std::atomic<std::size_t> empty_outputs_{0};
};

inline Extraction extract_answer(std::string_view output, const std::vector<std::string>& choices) {
  return AnswerExtractor().extract(output, choices);
}

}  // namespace tmplgen
