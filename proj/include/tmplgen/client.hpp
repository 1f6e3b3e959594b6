// Copyright (C) 2026 The tmplgen Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "httplib.h"
#include "json.hpp"
#include "tmplgen/error.hpp"
#include "tmplgen/extract.hpp"

namespace tmplgen {

struct QueryRequest {
  std::string item_id;
  int template_id = 0;
  std::string prompt;
  std::optional<std::string> image;
};

// A model under evaluation. Implementations must tolerate concurrent calls
// and must not touch evaluation state; throwing any exception counts as a
// failed attempt.
class ModelClient {
 public:
  virtual ~ModelClient() = default;
  virtual std::string query(const QueryRequest& request) = 0;
};

// Answers from a caller-supplied function. Used for deterministic mocks.
class MockClient final : public ModelClient {
 public:
  using Fn = std::function<std::string(const QueryRequest&)>;

  explicit MockClient(Fn fn) : fn_(std::move(fn)) {}

  // Always replies with the same text.
  static MockClient constant(std::string reply) {
    return MockClient([reply = std::move(reply)](const QueryRequest&) { return reply; });
  }

  std::string query(const QueryRequest& request) override { return fn_(request); }

 private:
  Fn fn_;
};

// Raw model output for one (item, template) cell.
struct RawOutput {
  std::string item_id;
  int template_id = 0;
  std::string output;
};

inline nlohmann::json to_json(const RawOutput& r) {
  return {{"item_id", r.item_id}, {"template_id", r.template_id}, {"output", r.output}};
}

// Reads a raw-output file. A torn final line (from an interrupted run) is
// skipped; any other malformed line is an error.
inline std::vector<RawOutput> read_raw_outputs(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::vector<RawOutput> out;
  std::string line;
  std::size_t lineno = 0;
  std::optional<std::string> bad;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (bad) throw IoError(*bad);
    try {
      const auto j = nlohmann::json::parse(line);
      out.push_back({j.at("item_id").get<std::string>(), j.at("template_id").get<int>(),
                     j.at("output").get<std::string>()});
    } catch (const nlohmann::json::exception& e) {
      bad = path.string() + " line " + std::to_string(lineno) + ": " + e.what();
    }
  }
  return out;
}

// Replays outputs recorded by an earlier run.
class ReplayClient final : public ModelClient {
 public:
  explicit ReplayClient(const std::vector<RawOutput>& outputs) {
    for (const auto& r : outputs) outputs_[{r.item_id, r.template_id}] = r.output;
  }
  explicit ReplayClient(const std::filesystem::path& path) : ReplayClient(read_raw_outputs(path)) {}

  std::string query(const QueryRequest& request) override {
    auto it = outputs_.find({request.item_id, request.template_id});
    if (it == outputs_.end()) {
      throw ClientError("replay has no output for item '" + request.item_id + "' template " +
                        std::to_string(request.template_id));
    }
    return it->second;
  }

 private:
  std::map<std::pair<std::string, int>, std::string> outputs_;
};

inline std::string base64_encode(std::string_view bytes) {
  static constexpr char kAlphabet[] =
      "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < bytes.size(); i += 3) {
    const std::uint32_t v = (static_cast<std::uint8_t>(bytes[i]) << 16) |
                            (static_cast<std::uint8_t>(bytes[i + 1]) << 8) |
                            static_cast<std::uint8_t>(bytes[i + 2]);
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += kAlphabet[(v >> 6) & 63];
    out += kAlphabet[v & 63];
  }
  if (i < bytes.size()) {
    std::uint32_t v = static_cast<std::uint8_t>(bytes[i]) << 16;
    if (i + 1 < bytes.size()) v |= static_cast<std::uint8_t>(bytes[i + 1]) << 8;
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += i + 1 < bytes.size() ? kAlphabet[(v >> 6) & 63] : '=';
    out += '=';
  }
  return out;
}

struct HttpEndpoint {
  std::string host;  // scheme://host:port
  std::string path;
};

inline HttpEndpoint parse_endpoint(std::string_view url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string_view::npos || url.substr(0, scheme_end) != "http") {
    throw ConfigError("endpoint must be an http:// URL: " + std::string(url));
  }
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string_view::npos) return {std::string(url), "/"};
  return {std::string(url.substr(0, path_start)), std::string(url.substr(path_start))};
}

struct HttpOptions {
  std::chrono::milliseconds timeout{60'000};
  // Directory that relative image paths are resolved against.
  std::filesystem::path image_root;
};

// POSTs {"prompt": str, "image": base64?} and expects {"text": str}.
class HttpClient final : public ModelClient {
 public:
  explicit HttpClient(std::string_view url, HttpOptions opts = {})
      : endpoint_(parse_endpoint(url)), opts_(std::move(opts)) {}

  std::string query(const QueryRequest& request) override {
    nlohmann::json body{{"prompt", request.prompt}};
    if (request.image) {
      std::filesystem::path p(*request.image);
      if (p.is_relative() && !opts_.image_root.empty()) p = opts_.image_root / p;
      std::ifstream in(p, std::ios::binary);
      if (!in) throw IoError("cannot open image '" + p.string() + "'");
      std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
      body["image"] = base64_encode(bytes);
    }
    httplib::Client cli(endpoint_.host);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(opts_.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(opts_.timeout - secs);
    cli.set_connection_timeout(secs.count(), usecs.count());
    cli.set_read_timeout(secs.count(), usecs.count());
    cli.set_write_timeout(secs.count(), usecs.count());
    auto res = cli.Post(endpoint_.path, body.dump(), "application/json");
    if (!res) {
      throw ClientError("request to " + endpoint_.host + endpoint_.path +
                        " failed: " + httplib::to_string(res.error()));
    }
    if (res->status != 200) {
      throw ClientError("endpoint returned HTTP " + std::to_string(res->status));
    }
    try {
      return nlohmann::json::parse(res->body).at("text").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw ClientError(std::string("endpoint reply has no \"text\" string: ") + e.what());
    }
  }

 private:
  HttpEndpoint endpoint_;
  HttpOptions opts_;
};

// Similarity scorer backed by an embeddings endpoint: POSTs
// {"input": [output, choice...]} and expects {"embeddings": [[float...]...]}
// in the same order, then ranks choices by cosine against the output.
class EmbeddingScorer final : public SimilarityScorer {
 public:
  explicit EmbeddingScorer(std::string_view url, HttpOptions opts = {})
      : endpoint_(parse_endpoint(url)), opts_(std::move(opts)) {}

  std::vector<double> score(std::string_view output,
                            const std::vector<std::string>& choices) const override {
    nlohmann::json input = nlohmann::json::array();
    input.push_back(output);
    for (const auto& c : choices) input.push_back(c);
    httplib::Client cli(endpoint_.host);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(opts_.timeout);
    cli.set_read_timeout(secs.count(), 0);
    auto res = cli.Post(endpoint_.path, nlohmann::json{{"input", input}}.dump(), "application/json");
    if (!res || res->status != 200) throw ClientError("embedding request failed");

    std::vector<std::vector<double>> emb;
    try {
      emb = nlohmann::json::parse(res->body).at("embeddings").get<std::vector<std::vector<double>>>();
    } catch (const nlohmann::json::exception& e) {
      throw ClientError(std::string("malformed embedding reply: ") + e.what());
    }
    if (emb.size() != choices.size() + 1) throw ClientError("embedding count mismatch");

    auto cosine = [](const std::vector<double>& a, const std::vector<double>& b) {
      double dot = 0, na = 0, nb = 0;
      for (std::size_t i = 0; i < a.size() && i < b.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
      }
      return na == 0 || nb == 0 ? 0.0 : dot / (std::sqrt(na) * std::sqrt(nb));
    };
    std::vector<double> scores;
    for (std::size_t i = 0; i < choices.size(); ++i) scores.push_back(cosine(emb[0], emb[i + 1]));
    return scores;
  }

 private:
  HttpEndpoint endpoint_;
  HttpOptions opts_;
};

}  // namespace tmplgen
