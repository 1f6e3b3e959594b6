// Copyright (C) 2026 The tmplgen Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "json.hpp"
#include "tmplgen/augment.hpp"
#include "tmplgen/client.hpp"
#include "tmplgen/error.hpp"
#include "tmplgen/extract.hpp"
#include "tmplgen/sampler.hpp"

namespace tmplgen {

// One multiple-choice question. Choice order is taken from the source
// dataset and never permuted.
struct EvalItem {
  std::string id;
  std::optional<std::string> image;
  std::string question;
  std::vector<std::string> choices;
  std::size_t answer_index = 0;
};

struct EvalItemSet {
  std::vector<EvalItem> items;
  // Multi-image items dropped on load.
  std::size_t skipped_multi_image = 0;
};

inline EvalItem eval_item_from_json(const nlohmann::json& j) {
  EvalItem item;
  try {
    const auto& id = j.at("id");
    item.id = id.is_string() ? id.get<std::string>() : id.dump();
    if (j.contains("image") && !j.at("image").is_null()) {
      item.image = j.at("image").get<std::string>();
    }
    item.question = j.at("question").get<std::string>();
    item.choices = j.at("choices").get<std::vector<std::string>>();
    const auto answer = j.at("answer").get<long long>();
    if (item.choices.size() < 2) throw ValidationError("item '" + item.id + "': fewer than 2 choices");
    if (answer < 0 || static_cast<std::size_t>(answer) >= item.choices.size()) {
      throw ValidationError("item '" + item.id + "': answer index out of range");
    }
    item.answer_index = static_cast<std::size_t>(answer);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("malformed eval item: " + std::string(e.what()));
  }
  return item;
}

// Line-delimited {"id","image","question","choices":[...],"answer":int}.
// Items whose "image" is an array of more than one path are skipped.
inline EvalItemSet read_eval_items(std::istream& in) {
  EvalItemSet set;
  std::string line;
  std::size_t lineno = 0;
  std::set<std::string> ids;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw IoError("eval items line " + std::to_string(lineno) + ": " + e.what());
    }
    if (j.is_object() && j.contains("image") && j.at("image").is_array()) {
      if (j.at("image").size() > 1) {
        ++set.skipped_multi_image;
        continue;
      }
      j["image"] = j.at("image").empty() ? nlohmann::json() : j.at("image").at(0);
    }
    set.items.push_back(eval_item_from_json(j));
    if (!ids.insert(set.items.back().id).second) {
      throw ValidationError("duplicate eval item id '" + set.items.back().id + "'");
    }
  }
  return set;
}

inline EvalItemSet load_eval_items(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  return read_eval_items(in);
}

// "(A) cat\n(B) dog": one lettered line per choice, in the given order.
inline std::string format_choices(const std::vector<std::string>& choices) {
  if (choices.size() > 26) {
    throw CapacityError("cannot letter " + std::to_string(choices.size()) +
                        " choices; at most 26 are supported");
  }
  std::string out;
  for (std::size_t i = 0; i < choices.size(); ++i) {
    if (i > 0) out += '\n';
    out += '(';
    out += static_cast<char>('A' + i);
    out += ") ";
    out += choices[i];
  }
  return out;
}

// Three common minimal layouts, useful as a baseline template set.
inline std::vector<std::string> simple_templates() {
  return {
      "{question}\n{choices}",
      "Question: {question}\nChoices: {choices}",
      "Question: {question}\nSelect from the following choices: {choices}",
  };
}

struct TemplatedItem {
  const EvalItem* item = nullptr;
  int template_id = 0;
  std::string prompt;
};

// Every item under every template, item-major. Template ids are positions
// in `templates`.
inline std::vector<TemplatedItem> build_templated_benchmark(const std::vector<EvalItem>& items,
                                                            const std::vector<std::string>& templates) {
  if (items.empty()) throw ConfigError("no evaluation items");
  if (templates.empty()) throw ConfigError("no evaluation templates");
  for (const auto& t : templates) {
    if (count_occurrences(t, kQuestionSlot) != 1 || count_occurrences(t, kChoicesSlot) != 1) {
      throw ValidationError("template lacks exactly one {question} and {choices}: \"" + t + "\"");
    }
  }
  std::vector<TemplatedItem> out;
  out.reserve(items.size() * templates.size());
  for (const auto& item : items) {
    const std::string choices = format_choices(item.choices);
    for (std::size_t t = 0; t < templates.size(); ++t) {
      out.push_back({&item, static_cast<int>(t), fill_template(templates[t], item.question, choices)});
    }
  }
  return out;
}

inline std::vector<std::string> template_texts(const TemplateSet& set) {
  std::vector<std::string> out;
  out.reserve(set.records.size());
  for (const auto& r : set.records) out.push_back(r.text);
  return out;
}

// ---------------------------------------------------------------------------
// Scoring

struct Response {
  const TemplatedItem* cell = nullptr;
  std::size_t predicted = 0;
};

struct EvalReport {
  std::map<int, double> per_template_accuracy;
  double average = 0;
  double max_min = 0;
  std::size_t n_items = 0;
  std::size_t n_templates = 0;
  // Extraction statistics; zero when scored from bare indices.
  std::size_t similarity_fallbacks = 0;
  std::size_t empty_outputs = 0;
};

// Per-template accuracy over a complete item x template grid, with the
// unweighted mean and the best-minus-worst spread across templates.
inline EvalReport score(const std::vector<Response>& responses) {
  std::set<std::string> item_ids;
  std::set<int> template_ids;
  std::map<std::pair<std::string, int>, int> cells;
  std::map<int, std::size_t> correct;
  for (const auto& r : responses) {
    const auto& id = r.cell->item->id;
    item_ids.insert(id);
    template_ids.insert(r.cell->template_id);
    ++cells[{id, r.cell->template_id}];
    if (r.predicted == r.cell->item->answer_index) ++correct[r.cell->template_id];
  }
  if (responses.empty()) throw CoverageError("no responses to score");

  std::vector<std::string> problems;
  for (const auto& id : item_ids) {
    for (int t : template_ids) {
      auto it = cells.find({id, t});
      const int n = it == cells.end() ? 0 : it->second;
      if (n == 1) continue;
      problems.push_back("(" + id + ", " + std::to_string(t) + ")" +
                         (n == 0 ? "" : " x" + std::to_string(n)));
    }
  }
  if (!problems.empty()) {
    std::string msg = "incomplete grid, " + std::to_string(problems.size()) +
                      " missing or duplicated (item, template) cells:";
    for (std::size_t i = 0; i < problems.size() && i < 20; ++i) msg += " " + problems[i];
    if (problems.size() > 20) msg += " ...";
    throw CoverageError(msg);
  }

  EvalReport report;
  report.n_items = item_ids.size();
  report.n_templates = template_ids.size();
  double lo = 1, hi = 0, sum = 0;
  for (int t : template_ids) {
    const double acc = static_cast<double>(correct[t]) / static_cast<double>(report.n_items);
    report.per_template_accuracy[t] = acc;
    lo = std::min(lo, acc);
    hi = std::max(hi, acc);
    sum += acc;
  }
  report.average = sum / static_cast<double>(report.n_templates);
  report.max_min = hi - lo;
  return report;
}

inline nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json acc = nlohmann::json::object();
  for (const auto& [t, a] : r.per_template_accuracy) acc[std::to_string(t)] = a;
  return {{"per_template_accuracy", acc},
          {"average", r.average},
          {"max_min", r.max_min},
          {"n_items", r.n_items},
          {"n_templates", r.n_templates},
          {"similarity_fallbacks", r.similarity_fallbacks},
          {"empty_outputs", r.empty_outputs}};
}

inline void write_report_csv(std::ostream& out, const EvalReport& r) {
  out << "template_id,accuracy\n";
  for (const auto& [t, a] : r.per_template_accuracy) {
    out << t << ',' << nlohmann::json(a).dump() << '\n';
  }
}

// Extracts an answer from every raw output and scores the grid. Outputs for
// cells outside `cells` are ignored.
inline EvalReport score_outputs(const std::vector<TemplatedItem>& cells,
                                const std::vector<RawOutput>& outputs,
                                const AnswerExtractor& extractor = {}) {
  std::map<std::pair<std::string, int>, const std::string*> by_cell;
  for (const auto& o : outputs) by_cell[{o.item_id, o.template_id}] = &o.output;
  std::vector<Response> responses;
  responses.reserve(cells.size());
  std::size_t fallbacks = 0;
  const std::size_t empty_before = extractor.empty_outputs();
  for (const auto& cell : cells) {
    auto it = by_cell.find({cell.item->id, cell.template_id});
    if (it == by_cell.end()) continue;
    const auto e = extractor.extract(*it->second, cell.item->choices);
    if (e.method == ExtractMethod::kSimilarity) ++fallbacks;
    responses.push_back({&cell, e.index});
  }
  if (responses.size() != cells.size()) {
    throw CoverageError(std::to_string(cells.size() - responses.size()) + " of " +
                        std::to_string(cells.size()) + " cells have no model output");
  }
  EvalReport report = score(responses);
  report.similarity_fallbacks = fallbacks;
  report.empty_outputs = extractor.empty_outputs() - empty_before;
  return report;
}

// ---------------------------------------------------------------------------
// Orchestration

struct RunOptions {
  unsigned concurrency = 4;
  // Extra attempts after the first failure of a cell.
  unsigned max_retries = 3;
  std::chrono::milliseconds retry_backoff{200};
  // Raw outputs are appended here as they arrive. Cells already present are
  // not queried again, which makes interrupted runs resumable.
  std::filesystem::path raw_output_path;
};

// Queries every cell at most once, persisting each raw output before any
// scoring, then scores from the persisted file.
inline EvalReport run_eval(const std::vector<EvalItem>& items, const std::vector<std::string>& templates,
                           ModelClient& client, const RunOptions& opts,
                           const AnswerExtractor& extractor = {}) {
  if (opts.raw_output_path.empty()) throw ConfigError("run_eval needs a raw output path");
  const auto cells = build_templated_benchmark(items, templates);

  std::set<std::pair<std::string, int>> done;
  if (std::filesystem::exists(opts.raw_output_path)) {
    for (const auto& o : read_raw_outputs(opts.raw_output_path)) done.insert({o.item_id, o.template_id});
  }
  std::vector<const TemplatedItem*> pending;
  for (const auto& c : cells) {
    if (done.count({c.item->id, c.template_id}) == 0) pending.push_back(&c);
  }

  std::ofstream sink(opts.raw_output_path, std::ios::app);
  if (!sink) throw IoError("cannot open '" + opts.raw_output_path.string() + "' for append");
  std::mutex sink_mu;
  std::atomic<std::size_t> next{0};
  std::atomic<bool> abort{false};
  std::string failure;

  auto worker = [&]() {
    for (;;) {
      if (abort.load()) return;
      const std::size_t i = next.fetch_add(1);
      if (i >= pending.size()) return;
      const TemplatedItem& cell = *pending[i];
      const QueryRequest req{cell.item->id, cell.template_id, cell.prompt, cell.item->image};
      std::optional<std::string> output;
      std::string last_error;
      for (unsigned attempt = 0; attempt <= opts.max_retries && !abort.load(); ++attempt) {
        if (attempt > 0) std::this_thread::sleep_for(opts.retry_backoff * attempt);
        try {
          output = client.query(req);
          break;
        } catch (const std::exception& e) {
          last_error = e.what();
        }
      }
      std::lock_guard<std::mutex> lock(sink_mu);
      if (!output) {
        if (!abort.exchange(true)) {
          failure = "item '" + cell.item->id + "' template " + std::to_string(cell.template_id) +
                    " failed after " + std::to_string(opts.max_retries + 1) +
                    " attempts: " + last_error;
        }
        return;
      }
      sink << to_json(RawOutput{cell.item->id, cell.template_id, *output}).dump() << '\n';
      sink.flush();
    }
  };

  const unsigned n_workers = std::max(1u, std::min<unsigned>(opts.concurrency,
                                                             static_cast<unsigned>(pending.size())));
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < n_workers && !pending.empty(); ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  sink.close();

  if (abort.load()) {
    throw ClientError(failure + "; partial outputs kept in " + opts.raw_output_path.string());
  }
  return score_outputs(cells, read_raw_outputs(opts.raw_output_path), extractor);
}

}  // namespace tmplgen
