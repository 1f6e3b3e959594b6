// Copyright (C) 2026 The tmplgen Authors
// SPDX-License-Identifier: Apache-2.0

// tmplgen: validate/count grammars, sample template sets, augment
// instruction corpora and evaluate models on templated benchmarks. Every
// stage reads and writes files, and every output gets a sidecar manifest.

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "tmplgen/tmplgen.hpp"

#ifndef TMPLGEN_DEFAULT_GRAMMAR
#define TMPLGEN_DEFAULT_GRAMMAR "data/default_grammar.json"
#endif

namespace fs = std::filesystem;
using namespace tmplgen;

namespace {

struct RunConfig {
  std::string grammar_path = TMPLGEN_DEFAULT_GRAMMAR;
  std::optional<std::uint64_t> seed;
  std::uint64_t scale = 0;
  std::string in_path;
  std::string templates_path;
  std::string out_path;
  std::string policy = "per_record_random";
  std::string turns = "first_human";
  std::string endpoint;
  std::string embedding_endpoint;
  std::string replay_path;
  std::optional<std::string> mock_answer;
  std::string image_root;
  unsigned concurrency = 4;
  unsigned workers = 1;
  unsigned retries = 3;
  unsigned timeout_ms = 60'000;
  bool simple = false;
  bool nested = false;
  bool strict = false;
  bool overwrite = false;
};

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for hashing");
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr);
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), md, &len);
  std::ostringstream hex;
  for (unsigned i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
  return hex.str();
}

// Refuses to clobber an existing output unless --overwrite was given.
void claim_output(const fs::path& path, bool overwrite) {
  if (fs::exists(path) && !overwrite) {
    throw IoError("'" + path.string() + "' exists; pass --overwrite to replace it");
  }
}

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  return out;
}

void write_manifest(const fs::path& out, const std::string& command, const RunConfig& cfg,
                    const std::vector<fs::path>& inputs, nlohmann::json params = {}) {
  nlohmann::json digests = nlohmann::json::object();
  for (const auto& p : inputs) digests[p.string()] = sha256_file(p);
  nlohmann::json m{{"tool", "tmplgen"},
                   {"version", kVersion},
                   {"command", command},
                   {"output", out.string()},
                   {"output_sha256", sha256_file(out)},
                   {"inputs", digests}};
  if (cfg.seed) m["seed"] = *cfg.seed;
  if (!params.is_null()) m["params"] = std::move(params);
  auto f = open_output(fs::path(out.string() + ".manifest.json"));
  f << m.dump(2) << '\n';
}

GrammarBundle load_for_cli(const RunConfig& cfg, std::ostream& err) {
  GrammarBundle bundle = load_grammar(cfg.grammar_path, LoadOptions{cfg.strict});
  for (const auto& w : bundle.warnings) err << "warning: " << w << '\n';
  ValidateOptions vopts;
  vopts.strict = cfg.strict;
  auto diags = validate_grammar(bundle.grammar, vopts);
  auto structure = check_structure(bundle.tree, bundle.grammar);
  diags.insert(diags.end(), structure.begin(), structure.end());
  for (const auto& d : diags) err << d.to_string() << '\n';
  if (has_errors(diags)) {
    throw ValidationError(cfg.grammar_path + ": " + std::to_string(std::count_if(
                              diags.begin(), diags.end(), [](const Diagnostic& d) { return d.is_error(); })) +
                          " validation error(s)");
  }
  accumulate_weights_in_place(bundle.tree, bundle.grammar);
  return bundle;
}

int cmd_validate(const RunConfig& cfg) {
  const auto bundle = load_for_cli(cfg, std::cerr);
  std::cout << cfg.grammar_path << ": ok (" << bundle.grammar.meta_count() << " meta templates, "
            << total_count(bundle.tree) << " templates)\n";
  return 0;
}

int cmd_count(const RunConfig& cfg) {
  const auto bundle = load_for_cli(cfg, std::cerr);
  std::vector<std::pair<std::string, Count>> rows;
  for (const auto& m : bundle.grammar.meta_templates) rows.emplace_back(m.id, count_templates(m, bundle.grammar));
  std::sort(rows.begin(), rows.end());
  for (const auto& [id, n] : rows) std::cout << id << '\t' << n << '\n';
  std::cout << "metas\t" << rows.size() << '\n';
  std::cout << "total\t" << total_count(bundle.tree) << '\n';
  return 0;
}

int cmd_sample(const RunConfig& cfg) {
  if (!cfg.seed) throw ConfigError("sample requires --seed");
  if (cfg.out_path.empty()) throw ConfigError("sample requires --out");
  claim_output(cfg.out_path, cfg.overwrite);
  const auto bundle = load_for_cli(cfg, std::cerr);
  const auto set = cfg.nested ? sample_nested(bundle.tree, bundle.grammar, cfg.scale, *cfg.seed)
                              : sample_distinct(bundle.tree, bundle.grammar, cfg.scale, *cfg.seed);
  {
    auto out = open_output(cfg.out_path);
    write_template_set(out, set);
    if (!out) throw IoError("error writing '" + cfg.out_path + "'");
  }
  write_manifest(cfg.out_path, "sample", cfg, {cfg.grammar_path},
                 {{"scale", cfg.scale}, {"nested", cfg.nested}, {"total", set.total}});
  std::cerr << "sampled " << set.records.size() << " of " << set.total << " templates\n";
  return 0;
}

AugmentPolicy policy_from(const RunConfig& cfg) {
  AugmentPolicy p;
  if (cfg.policy == "per_record_random") {
    p.mode = AugmentPolicy::Mode::kPerRecordRandom;
  } else if (cfg.policy == "round_robin") {
    p.mode = AugmentPolicy::Mode::kRoundRobin;
  } else {
    throw ConfigError("unknown --policy '" + cfg.policy + "'");
  }
  if (cfg.turns == "first_human") {
    p.turns = AugmentPolicy::Turns::kFirstHuman;
  } else if (cfg.turns == "all_human") {
    p.turns = AugmentPolicy::Turns::kAllHuman;
  } else {
    throw ConfigError("unknown --turns '" + cfg.turns + "'");
  }
  p.seed = cfg.seed;
  check_policy(p);
  return p;
}

int cmd_augment(const RunConfig& cfg) {
  const AugmentPolicy policy = policy_from(cfg);
  if (cfg.in_path.empty() || cfg.templates_path.empty() || cfg.out_path.empty()) {
    throw ConfigError("augment requires --in, --templates and --out");
  }
  claim_output(cfg.out_path, cfg.overwrite);
  const fs::path rejects_path = cfg.out_path + ".rejects.jsonl";
  claim_output(rejects_path, cfg.overwrite);

  const auto set = load_template_set(cfg.templates_path);
  const auto corpus = load_corpus(cfg.in_path);
  const auto augmented = apply_templates(corpus.records, set, policy, cfg.workers);
  {
    auto out = open_output(cfg.out_path);
    write_corpus(out, augmented);
    if (!out) throw IoError("error writing '" + cfg.out_path + "'");
    auto rej = open_output(rejects_path);
    write_rejects(rej, corpus.rejects);
  }
  write_manifest(cfg.out_path, "augment", cfg, {cfg.in_path, cfg.templates_path},
                 {{"policy", cfg.policy}, {"turns", cfg.turns}, {"templates", set.records.size()}});
  std::cout << "records in: " << corpus.records.size() << ", records out: " << augmented.size()
            << ", rejected: " << corpus.rejects.size() << '\n';
  return 0;
}

int cmd_eval(const RunConfig& cfg) {
  if (cfg.in_path.empty() || cfg.out_path.empty()) throw ConfigError("eval requires --in and --out");
  if (cfg.simple == !cfg.templates_path.empty()) {
    throw ConfigError("eval requires exactly one of --templates or --simple");
  }
  const int sources = !cfg.endpoint.empty() + !cfg.replay_path.empty() + cfg.mock_answer.has_value();
  if (sources != 1) throw ConfigError("eval requires exactly one of --endpoint, --replay or --mock-answer");

  const fs::path report_path = cfg.out_path;
  const fs::path csv_path = fs::path(cfg.out_path).replace_extension(".csv");
  const fs::path raw_path = cfg.out_path + ".raw.jsonl";
  claim_output(report_path, cfg.overwrite);
  claim_output(csv_path, cfg.overwrite);
  if (cfg.overwrite) fs::remove(raw_path);

  const auto items = load_eval_items(cfg.in_path);
  if (items.skipped_multi_image > 0) {
    std::cerr << "skipped " << items.skipped_multi_image << " multi-image items\n";
  }
  const auto templates = cfg.simple ? simple_templates() : template_texts(load_template_set(cfg.templates_path));

  std::unique_ptr<ModelClient> client;
  HttpOptions http;
  http.timeout = std::chrono::milliseconds(cfg.timeout_ms);
  http.image_root = cfg.image_root;
  if (!cfg.endpoint.empty()) {
    client = std::make_unique<HttpClient>(cfg.endpoint, http);
  } else if (!cfg.replay_path.empty()) {
    client = std::make_unique<ReplayClient>(fs::path(cfg.replay_path));
  } else {
    client = std::make_unique<MockClient>(MockClient::constant(*cfg.mock_answer));
  }
  std::shared_ptr<const SimilarityScorer> scorer = std::make_shared<LexicalScorer>();
  if (!cfg.embedding_endpoint.empty()) scorer = std::make_shared<EmbeddingScorer>(cfg.embedding_endpoint, http);
  const AnswerExtractor extractor(scorer);

  RunOptions opts;
  opts.concurrency = cfg.concurrency;
  opts.max_retries = cfg.retries;
  opts.raw_output_path = raw_path;
  const EvalReport report = run_eval(items.items, templates, *client, opts, extractor);
  {
    auto out = open_output(report_path);
    out << to_json(report).dump(2) << '\n';
    auto csv = open_output(csv_path);
    write_report_csv(csv, report);
  }
  std::vector<fs::path> inputs{cfg.in_path};
  if (!cfg.templates_path.empty()) inputs.emplace_back(cfg.templates_path);
  if (!cfg.replay_path.empty()) inputs.emplace_back(cfg.replay_path);
  write_manifest(report_path, "eval", cfg, inputs,
                 {{"raw_outputs", raw_path.string()}, {"csv", csv_path.string()}});
  std::cout << std::fixed << std::setprecision(4) << "items " << report.n_items << ", templates "
            << report.n_templates << ", average " << report.average << ", max-min " << report.max_min
            << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Programmatic instruction template generator"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);
  RunConfig cfg;

  auto add_grammar = [&](CLI::App* sub) {
    sub->add_option("--grammar", cfg.grammar_path, "Grammar JSON file")->capture_default_str();
    sub->add_flag("--strict", cfg.strict, "Reject unknown keys and orphan synonym sets");
  };

  auto* validate = app.add_subcommand("validate", "Check a grammar file");
  add_grammar(validate);

  auto* count = app.add_subcommand("count", "Print per-meta template counts and the total");
  add_grammar(count);

  auto* sample = app.add_subcommand("sample", "Draw K distinct templates");
  add_grammar(sample);
  sample->add_option("--scale", cfg.scale, "Number of templates K")->required()->check(CLI::PositiveNumber);
  sample->add_option("--seed", cfg.seed, "Random seed")->required();
  sample->add_option("--out", cfg.out_path, "Template set output (JSONL)")->required();
  sample->add_flag("--nested", cfg.nested, "Sets with one seed are nested across scales");
  sample->add_flag("--overwrite", cfg.overwrite);

  auto* augment = app.add_subcommand("augment", "Rewrite corpus instructions with sampled templates");
  augment->add_option("--in", cfg.in_path, "Instruction corpus (JSON array)")->required();
  augment->add_option("--templates", cfg.templates_path, "Template set file")->required();
  augment->add_option("--out", cfg.out_path, "Augmented corpus output")->required();
  augment->add_option("--policy", cfg.policy, "per_record_random | round_robin")->capture_default_str();
  augment->add_option("--turns", cfg.turns, "first_human | all_human")->capture_default_str();
  augment->add_option("--seed", cfg.seed, "Seed for per_record_random");
  augment->add_option("--workers", cfg.workers, "Worker threads")->check(CLI::PositiveNumber);
  augment->add_flag("--overwrite", cfg.overwrite);

  auto* eval = app.add_subcommand("eval", "Evaluate a model on a templated benchmark");
  eval->add_option("--in", cfg.in_path, "Eval items (JSONL)")->required();
  eval->add_option("--templates", cfg.templates_path, "Template set file");
  eval->add_flag("--simple", cfg.simple, "Use the three simple templates");
  eval->add_option("--out", cfg.out_path, "Report JSON; CSV twin and raw outputs go alongside")->required();
  eval->add_option("--endpoint", cfg.endpoint, "Model endpoint URL");
  eval->add_option("--replay", cfg.replay_path, "Replay raw outputs from a previous run");
  eval->add_option("--mock-answer", cfg.mock_answer, "Deterministic mock that always replies with TEXT");
  eval->add_option("--embedding-endpoint", cfg.embedding_endpoint, "Embeddings endpoint for the similarity step");
  eval->add_option("--image-root", cfg.image_root, "Directory for relative image paths");
  eval->add_option("--concurrency", cfg.concurrency, "Concurrent model queries")->check(CLI::PositiveNumber);
  eval->add_option("--retries", cfg.retries, "Retries per query");
  eval->add_option("--timeout-ms", cfg.timeout_ms, "Per-request timeout");
  eval->add_flag("--overwrite", cfg.overwrite);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : static_cast<int>(ExitCode::kValidation);
  }

  try {
    if (*validate) return cmd_validate(cfg);
    if (*count) return cmd_count(cfg);
    if (*sample) return cmd_sample(cfg);
    if (*augment) return cmd_augment(cfg);
    if (*eval) return cmd_eval(cfg);
  } catch (const Error& e) {
    std::cerr << "tmplgen: " << e.what() << '\n';
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    std::cerr << "tmplgen: " << e.what() << '\n';
    return static_cast<int>(ExitCode::kIo);
  }
  return 0;
}
