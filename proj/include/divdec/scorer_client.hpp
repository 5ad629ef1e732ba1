// Copyright 2026 The Divdec Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

/**
 * Client for an external pairwise scorer (entailment / similarity models
 * served out of process).
 *
 * Wire protocol: HTTP POST of line-delimited JSON, one request per line:
 *
 *   {"kind":"entail","premise":"...","hypothesis":"...","index":0}
 *   {"kind":"similarity","a":"...","b":"...","index":1}
 *
 * The response body is line-delimited JSON of {"index":i,"score":s} rows in
 * any order, scores in [0, 1]. Every transport or format failure (endpoint
 * down, timeout, missing index, out-of-range score) falls back to the
 * lexical proxies for the whole batch and latches a flag that reports carry
 * as metadata. The endpoint comes from the DIVDEC_SCORER_ENDPOINT
 * environment variable unless configured explicitly.
 */

#ifndef DIVDEC_SCORER_CLIENT_HPP_
#define DIVDEC_SCORER_CLIENT_HPP_

#include <atomic>
#include <cstdlib>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "httplib.h"
#include "json.hpp"

#include "divdec/error.hpp"
#include "divdec/metrics.hpp"

namespace divdec::metrics {

struct ScorerConfig {
  std::string endpoint;  // "http://host:port/path"; empty means proxies only
  double timeout_seconds = 5.0;
};

inline std::optional<std::string> scorer_endpoint_from_env() {
  const char* value = std::getenv("DIVDEC_SCORER_ENDPOINT");
  if (value == nullptr || *value == '\0') return std::nullopt;
  return std::string(value);
}

class ExternalScorerClient {
 public:
  explicit ExternalScorerClient(ScorerConfig config) : config_(std::move(config)) {
    size_t scheme = config_.endpoint.find("://");
    if (scheme != std::string::npos) {
      size_t slash = config_.endpoint.find('/', scheme + 3);
      if (slash == std::string::npos) {
        base_ = config_.endpoint;
        path_ = "/";
      } else {
        base_ = config_.endpoint.substr(0, slash);
        path_ = config_.endpoint.substr(slash);
      }
    }
  }

  bool enabled() const { return !base_.empty(); }
  bool fallback_used() const { return fallback_used_.load(); }

  // One score per pair, request order. kind is "entail" (a = premise,
  // b = hypothesis) or "similarity".
  std::vector<double> score_batch(const std::string& kind,
                                  const std::vector<std::pair<std::string, std::string>>& pairs) {
    if (pairs.empty()) return {};
    if (enabled()) {
      if (auto scores = try_remote(kind, pairs)) return *scores;
      fallback_used_.store(true);
    }
    std::vector<double> out;
    out.reserve(pairs.size());
    for (const auto& [a, b] : pairs) {
      out.push_back(kind == "entail" ? lexical_entailment_proxy(a, b) : unigram_f1(a, b));
    }
    return out;
  }

 private:
  std::optional<std::vector<double>> try_remote(
      const std::string& kind,
      const std::vector<std::pair<std::string, std::string>>& pairs) const {
    std::string body;
    for (size_t i = 0; i < pairs.size(); ++i) {
      nlohmann::json line;
      line["kind"] = kind;
      if (kind == "entail") {
        line["premise"] = pairs[i].first;
        line["hypothesis"] = pairs[i].second;
      } else {
        line["a"] = pairs[i].first;
        line["b"] = pairs[i].second;
      }
      line["index"] = i;
      body += line.dump();
      body += '\n';
    }

    httplib::Client client(base_);
    auto seconds = static_cast<time_t>(config_.timeout_seconds);
    auto micros = static_cast<time_t>((config_.timeout_seconds - static_cast<double>(seconds)) * 1e6);
    client.set_connection_timeout(seconds, micros);
    client.set_read_timeout(seconds, micros);
    client.set_write_timeout(seconds, micros);

    httplib::Result result = client.Post(path_, body, "application/x-ndjson");
    if (!result || result->status != 200) return std::nullopt;

    std::vector<double> scores(pairs.size(), -1.0);
    size_t seen = 0;
    size_t pos = 0;
    const std::string& text = result->body;
    while (pos < text.size()) {
      size_t end = text.find('\n', pos);
      if (end == std::string::npos) end = text.size();
      std::string_view line(text.data() + pos, end - pos);
      pos = end + 1;
      if (line.empty()) continue;
      nlohmann::json row = nlohmann::json::parse(line, nullptr, /*allow_exceptions=*/false);
      if (row.is_discarded() || !row.contains("index") || !row.contains("score")) {
        return std::nullopt;
      }
      size_t index = row["index"].get<size_t>();
      double score = row["score"].get<double>();
      if (index >= scores.size() || score < 0.0 || score > 1.0 || scores[index] >= 0.0) {
        return std::nullopt;
      }
      scores[index] = score;
      ++seen;
    }
    if (seen != pairs.size()) return std::nullopt;
    return scores;
  }

  ScorerConfig config_;
  std::string base_;
  std::string path_;
  std::atomic<bool> fallback_used_{false};
};

// PairwiseScorer adapters over the client, for drop-in use by the metric
// layer. The client outlives the adapter.
class ExternalEntailmentScorer : public PairwiseScorer {
 public:
  explicit ExternalEntailmentScorer(ExternalScorerClient* client) : client_(client) {}
  double score(const std::string& premise, const std::string& hypothesis) const override {
    return client_->score_batch("entail", {{premise, hypothesis}}).front();
  }

 private:
  ExternalScorerClient* client_;
};

class ExternalSimilarityScorer : public PairwiseScorer {
 public:
  explicit ExternalSimilarityScorer(ExternalScorerClient* client) : client_(client) {}
  double score(const std::string& a, const std::string& b) const override {
    return client_->score_batch("similarity", {{a, b}}).front();
  }

 private:
  ExternalScorerClient* client_;
};

}  // namespace divdec::metrics

#endif  // DIVDEC_SCORER_CLIENT_HPP_
