// Copyright (C) 2026 The tmplgen Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include "json.hpp"
#include "tmplgen/error.hpp"
#include "tmplgen/grammar.hpp"
#include "tmplgen/random.hpp"
#include "tmplgen/sampler.hpp"

namespace tmplgen {

inline constexpr std::string_view kImageToken = "<image>";

enum class Role { kHuman, kGpt };

struct Turn {
  Role role = Role::kHuman;
  std::string value;
};

// One multimodal conversation in the LLaVA instruction-mix layout.
struct InstructionRecord {
  std::string id;
  std::optional<std::string> image;
  std::vector<Turn> conversations;
  // Any other top-level keys, written back untouched.
  nlohmann::ordered_json extra = nlohmann::ordered_json::object();
};

struct Reject {
  std::string id;
  std::string reason;
};

struct Corpus {
  std::vector<InstructionRecord> records;
  std::vector<Reject> rejects;
};

struct AugmentPolicy {
  enum class Mode { kPerRecordRandom, kRoundRobin };
  enum class Turns { kFirstHuman, kAllHuman };

  Mode mode = Mode::kPerRecordRandom;
  std::optional<std::uint64_t> seed;
  Turns turns = Turns::kFirstHuman;
};

// Loads abort once more than this fraction of records is malformed.
inline constexpr double kMaxRejectFraction = 0.01;

namespace detail {

// Returns the reject reason, or nothing when `j` is a valid record.
inline std::optional<std::string> decode_record(const nlohmann::ordered_json& j,
                                                InstructionRecord& out) {
  if (!j.is_object()) return "not an object";
  if (!j.contains("id")) return "missing id";
  const auto& id = j.at("id");
  if (id.is_string()) {
    out.id = id.get<std::string>();
  } else if (id.is_number_integer()) {
    out.id = id.dump();
  } else {
    return "id is not a string";
  }
  if (j.contains("image") && !j.at("image").is_null()) {
    if (!j.at("image").is_string()) return "image is not a string";
    out.image = j.at("image").get<std::string>();
  }
  if (!j.contains("conversations") || !j.at("conversations").is_array()) {
    return "missing conversations";
  }
  const auto& convs = j.at("conversations");
  if (convs.empty()) return "empty conversations";
  for (std::size_t i = 0; i < convs.size(); ++i) {
    const auto& t = convs[i];
    if (!t.is_object() || !t.contains("from") || !t.contains("value") ||
        !t.at("from").is_string() || !t.at("value").is_string()) {
      return "malformed turn";
    }
    const auto from = t.at("from").get<std::string>();
    Role role;
    if (from == "human") {
      role = Role::kHuman;
    } else if (from == "gpt") {
      role = Role::kGpt;
    } else {
      return "unknown role '" + from + "'";
    }
    if (role != (i % 2 == 0 ? Role::kHuman : Role::kGpt)) return "turn order";
    out.conversations.push_back({role, t.at("value").get<std::string>()});
  }
  const std::size_t images = count_occurrences(out.conversations.front().value, kImageToken);
  if (images > 1) return "multiple <image> tokens";
  for (std::size_t i = 1; i < out.conversations.size(); ++i) {
    if (count_occurrences(out.conversations[i].value, kImageToken) > 0) {
      return "<image> token outside the first human turn";
    }
  }
  for (const auto& [key, value] : j.items()) {
    if (key != "id" && key != "image" && key != "conversations") out.extra[key] = value;
  }
  return std::nullopt;
}

}  // namespace detail

inline Corpus parse_corpus(const std::string& text) {
  nlohmann::ordered_json doc;
  try {
    doc = nlohmann::ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw IoError(std::string("corpus is not valid JSON: ") + e.what());
  }
  if (!doc.is_array()) throw IoError("corpus root must be a JSON array");

  Corpus corpus;
  corpus.records.reserve(doc.size());
  for (std::size_t i = 0; i < doc.size(); ++i) {
    InstructionRecord rec;
    if (auto reason = detail::decode_record(doc[i], rec)) {
      std::string id = rec.id.empty() ? "#" + std::to_string(i) : rec.id;
      corpus.rejects.push_back({std::move(id), std::move(*reason)});
      continue;
    }
    corpus.records.push_back(std::move(rec));
  }
  if (!doc.empty() &&
      static_cast<double>(corpus.rejects.size()) > kMaxRejectFraction * static_cast<double>(doc.size())) {
    throw ValidationError(std::to_string(corpus.rejects.size()) + " of " +
                          std::to_string(doc.size()) +
                          " records are malformed, above the 1% abort threshold; first: " +
                          corpus.rejects.front().id + " (" + corpus.rejects.front().reason + ")");
  }
  return corpus;
}

inline Corpus load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_corpus(text);
}

inline nlohmann::ordered_json to_json(const InstructionRecord& rec) {
  nlohmann::ordered_json j;
  j["id"] = rec.id;
  if (rec.image) j["image"] = *rec.image;
  nlohmann::ordered_json convs = nlohmann::ordered_json::array();
  for (const auto& t : rec.conversations) {
    convs.push_back({{"from", t.role == Role::kHuman ? "human" : "gpt"}, {"value", t.value}});
  }
  j["conversations"] = std::move(convs);
  for (const auto& [key, value] : rec.extra.items()) j[key] = value;
  return j;
}

// One record per line inside a top-level array, so large corpora stay
// diffable and writing stays linear.
inline void write_corpus(std::ostream& out, const std::vector<InstructionRecord>& records) {
  out << "[";
  for (std::size_t i = 0; i < records.size(); ++i) {
    out << (i == 0 ? "\n" : ",\n") << to_json(records[i]).dump();
  }
  out << "\n]\n";
}

inline void write_rejects(std::ostream& out, const std::vector<Reject>& rejects) {
  for (const auto& r : rejects) {
    out << nlohmann::json{{"id", r.id}, {"reason", r.reason}}.dump() << '\n';
  }
}

// ---------------------------------------------------------------------------
// Instruction splitting

enum class ImagePlacement { kNone, kHead, kTail };

struct SplitInstruction {
  std::string question;
  std::optional<std::string> choices;
  ImagePlacement image = ImagePlacement::kNone;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  auto space = [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; };
  while (!s.empty() && space(s.front())) s.remove_prefix(1);
  while (!s.empty() && space(s.back())) s.remove_suffix(1);
  return s;
}

enum class OptionStyle { kParen, kDot, kRightParen };

struct OptionLine {
  char letter;
  OptionStyle style;
};

// Recognizes "A. text", "(A) text" and "A) text".
inline std::optional<OptionLine> parse_option_line(std::string_view line) {
  std::size_t i = 0;
  while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
  auto upper = [&](std::size_t k) { return k < line.size() && line[k] >= 'A' && line[k] <= 'Z'; };
  OptionLine opt{};
  std::size_t after;
  if (i + 2 < line.size() && line[i] == '(' && upper(i + 1) && line[i + 2] == ')') {
    opt = {line[i + 1], OptionStyle::kParen};
    after = i + 3;
  } else if (upper(i) && i + 1 < line.size() && (line[i + 1] == '.' || line[i + 1] == ')')) {
    opt = {line[i], line[i + 1] == '.' ? OptionStyle::kDot : OptionStyle::kRightParen};
    after = i + 2;
  } else {
    return std::nullopt;
  }
  if (after >= line.size() || (line[after] != ' ' && line[after] != '\t')) return std::nullopt;
  if (trim(line.substr(after)).empty()) return std::nullopt;
  return opt;
}

}  // namespace detail

// Splits an instruction into question text and a trailing block of option
// lines. The block must hold at least two lines labelled A, B, C... in one
// style. Anything unrecognized stays in the question.
inline SplitInstruction split_instruction(std::string_view value) {
  SplitInstruction out;
  std::string_view text = value;
  if (text.substr(0, kImageToken.size()) == kImageToken) {
    out.image = ImagePlacement::kHead;
    text.remove_prefix(kImageToken.size());
  } else {
    const std::string_view trimmed = detail::trim(text);
    if (trimmed.size() >= kImageToken.size() &&
        trimmed.substr(trimmed.size() - kImageToken.size()) == kImageToken) {
      out.image = ImagePlacement::kTail;
      text = trimmed.substr(0, trimmed.size() - kImageToken.size());
    }
  }
  text = detail::trim(text);

  std::vector<std::string_view> lines;
  for (std::size_t start = 0;;) {
    const auto nl = text.find('\n', start);
    lines.push_back(text.substr(start, nl == std::string_view::npos ? nl : nl - start));
    if (nl == std::string_view::npos) break;
    start = nl + 1;
  }

  std::size_t first = lines.size();
  while (first > 0 && detail::parse_option_line(lines[first - 1])) --first;
  // Keep only a run that starts at A with consecutive letters in one style.
  while (first < lines.size()) {
    bool ok = true;
    const auto head = *detail::parse_option_line(lines[first]);
    for (std::size_t k = first; k < lines.size() && ok; ++k) {
      const auto opt = *detail::parse_option_line(lines[k]);
      ok = opt.style == head.style && opt.letter == static_cast<char>('A' + (k - first));
    }
    if (ok) break;
    ++first;
  }

  const std::size_t block = lines.size() - first;
  if (block >= 2 && first > 0) {
    const std::size_t split_at = static_cast<std::size_t>(lines[first].data() - text.data());
    const auto question = detail::trim(text.substr(0, split_at));
    if (!question.empty()) {
      out.question = std::string(question);
      out.choices = std::string(text.substr(split_at));
      return out;
    }
  }
  out.question = std::string(text);
  return out;
}

// Fills the data slots of `tmpl` in a single pass, so slot-like text inside
// the question or choices is never substituted again. Without choices, the
// {choices} slot and its label (the text back to the previous sentence
// terminator or line break) are removed along with one adjacent newline.
inline std::string fill_template(std::string_view tmpl, std::string_view question,
                                 const std::optional<std::string>& choices) {
  if (count_occurrences(tmpl, kQuestionSlot) != 1 || count_occurrences(tmpl, kChoicesSlot) != 1) {
    throw ValidationError("template must contain {question} and {choices} exactly once: \"" +
                          std::string(tmpl) + "\"");
  }
  std::string t(tmpl);
  if (!choices) {
    const std::size_t c = t.find(kChoicesSlot);
    const std::size_t q = t.find(kQuestionSlot);
    std::size_t start = 0;
    if (q < c) start = q + kQuestionSlot.size();
    for (std::size_t k = c; k > start; --k) {
      const char ch = t[k - 1];
      if (ch == '.' || ch == '?' || ch == '!' || ch == '\n') {
        start = k;
        break;
      }
    }
    t.erase(start, c + kChoicesSlot.size() - start);
    if (start > 0 && t[start - 1] == '\n') {
      t.erase(start - 1, 1);
    } else if (start == 0 && !t.empty() && t[0] == '\n') {
      t.erase(0, 1);
    }
  }
  const std::size_t q = t.find(kQuestionSlot);
  const std::size_t c = choices ? t.find(kChoicesSlot) : std::string::npos;
  std::string out;
  out.reserve(t.size() + question.size() + (choices ? choices->size() : 0));
  if (c == std::string::npos) {
    out.append(t, 0, q).append(question).append(t, q + kQuestionSlot.size());
  } else if (q < c) {
    out.append(t, 0, q).append(question);
    out.append(t, q + kQuestionSlot.size(), c - q - kQuestionSlot.size()).append(*choices);
    out.append(t, c + kChoicesSlot.size());
  } else {
    out.append(t, 0, c).append(*choices);
    out.append(t, c + kChoicesSlot.size(), q - c - kChoicesSlot.size()).append(question);
    out.append(t, q + kQuestionSlot.size());
  }
  return out;
}

// Rewrites one human turn with `tmpl`; an <image> token moves to the head.
inline std::string rewrite_turn(std::string_view value, std::string_view tmpl) {
  const auto split = split_instruction(value);
  std::string filled = fill_template(tmpl, split.question, split.choices);
  if (split.image == ImagePlacement::kNone) return filled;
  return std::string(kImageToken) + "\n" + filled;
}

// Index of the template assigned to the record at `ordinal`.
inline std::size_t assign_template(const AugmentPolicy& policy, std::size_t ordinal,
                                   std::size_t n_templates) {
  if (policy.mode == AugmentPolicy::Mode::kRoundRobin) return ordinal % n_templates;
  return static_cast<std::size_t>(keyed_uniform(*policy.seed, ordinal, n_templates));
}

inline void check_policy(const AugmentPolicy& policy) {
  if (policy.mode == AugmentPolicy::Mode::kPerRecordRandom && !policy.seed) {
    throw ConfigError("per_record_random assignment requires a seed");
  }
}

// Rewrites the targeted human turns of every record. Output has the same
// length and order as the input; gpt turns are never touched. `workers`
// only changes speed: each record's template depends on (seed, ordinal).
inline std::vector<InstructionRecord> apply_templates(
    const std::vector<InstructionRecord>& corpus, const std::vector<std::string>& templates,
    const AugmentPolicy& policy, unsigned workers = 1) {
  if (templates.empty()) throw ConfigError("template set is empty");
  check_policy(policy);
  for (const auto& t : templates) fill_template(t, "", std::string());

  std::vector<InstructionRecord> out(corpus);
  auto run = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const std::string& tmpl = templates[assign_template(policy, i, templates.size())];
      for (auto& turn : out[i].conversations) {
        if (turn.role != Role::kHuman) continue;
        turn.value = rewrite_turn(turn.value, tmpl);
        if (policy.turns == AugmentPolicy::Turns::kFirstHuman) break;
      }
    }
  };
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(out.size() / 1024 + 1)));
  if (workers == 1) {
    run(0, out.size());
    return out;
  }
  std::vector<std::thread> pool;
  const std::size_t chunk = (out.size() + workers - 1) / workers;
  for (unsigned w = 0; w < workers; ++w) {
    const std::size_t begin = std::min(out.size(), w * chunk);
    const std::size_t end = std::min(out.size(), begin + chunk);
    pool.emplace_back(run, begin, end);
  }
  for (auto& t : pool) t.join();
  return out;
}

inline std::vector<InstructionRecord> apply_templates(const std::vector<InstructionRecord>& corpus,
                                                      const TemplateSet& set,
                                                      const AugmentPolicy& policy,
                                                      unsigned workers = 1) {
  std::vector<std::string> templates;
  templates.reserve(set.records.size());
  for (const auto& r : set.records) templates.push_back(r.text);
  return apply_templates(corpus, templates, policy, workers);
}

}  // namespace tmplgen
