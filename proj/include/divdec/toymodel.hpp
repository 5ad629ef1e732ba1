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
 * Desk-scale models the test suite and CLI run against.
 *
 * TableModel answers from an explicit (document id, prefix) table, which
 * makes decoder behavior fully scriptable. PlanNGramModel is a smoothed
 * n-gram over planned targets with a copy bias toward source tokens and an
 * optional grounding bias toward the already-generated chain; it is small
 * enough to train in milliseconds yet shows the plan/no-plan contrasts the
 * decoders are built around. enumerate_sequences is the brute-force scoring
 * oracle the beam searcher is validated against.
 */

#ifndef DIVDEC_TOYMODEL_HPP_
#define DIVDEC_TOYMODEL_HPP_

#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "divdec/core.hpp"
#include "divdec/plan.hpp"

namespace divdec::toy {

class TableModel : public ConditionalModel {
 public:
  TableModel(Vocabulary vocab, TokenDistribution fallback)
      : vocab_(std::move(vocab)), fallback_(std::move(fallback)) {
    check(fallback_);
  }

  // Pins the distribution returned for one (document id, prefix) pair.
  void set(std::string doc_id, std::vector<TokenId> prefix, TokenDistribution d) {
    check(d);
    table_[{std::move(doc_id), std::move(prefix)}] = std::move(d);
  }

  TokenDistribution next_distribution(const Document& input,
                                      std::span<const TokenId> prefix) const override {
    auto it = table_.find({input.id, {prefix.begin(), prefix.end()}});
    return it != table_.end() ? it->second : fallback_;
  }

  const Vocabulary& vocabulary() const override { return vocab_; }

 private:
  void check(const TokenDistribution& d) const {
    if (d.size() != vocab_.size() || !is_valid_distribution(d)) {
      throw ParameterError("table distribution is not a valid distribution over the vocabulary");
    }
  }

  Vocabulary vocab_;
  TokenDistribution fallback_;
  std::map<std::pair<std::string, std::vector<TokenId>>, TokenDistribution> table_;
};

// Every EOS-terminated sequence of at most max_len tokens (EOS included),
// with its exact NLL, in lexicographic token order. Refuses vocabularies
// where |V|^max_len exceeds 1e6 states.
inline std::vector<std::pair<std::vector<TokenId>, double>> enumerate_sequences(
    const ConditionalModel& model, const Document& input, int max_len) {
  if (max_len < 1) throw ParameterError("max_len must be >= 1");
  double states = std::pow(static_cast<double>(model.vocabulary().size()),
                           static_cast<double>(max_len));
  if (states > 1e6) {
    throw ParameterError("enumeration space exceeds 1e6 sequences; refuse to enumerate");
  }

  std::vector<std::pair<std::vector<TokenId>, double>> out;
  std::vector<TokenId> prefix;

  auto dfs = [&](auto&& self, double nll) -> void {
    if (static_cast<int>(prefix.size()) >= max_len) return;
    TokenDistribution d = model.next_distribution(input, prefix);
    for (size_t id = 0; id < d.size(); ++id) {
      double p = d.probs[id];
      if (p <= 0.0) continue;
      double step = nll - std::log(p);
      prefix.push_back(static_cast<TokenId>(id));
      if (static_cast<TokenId>(id) == Vocabulary::kEos) {
        out.emplace_back(prefix, step);
      } else {
        self(self, step);
      }
      prefix.pop_back();
    }
  };
  dfs(dfs, 0.0);
  return out;
}

// Index of the length-penalty argmax among enumerated sequences, breaking
// score ties toward the lexicographically smaller sequence. Mirrors the beam
// searcher's ranking rule exactly.
inline size_t best_sequence_index(
    const std::vector<std::pair<std::vector<TokenId>, double>>& sequences, double alpha) {
  if (sequences.empty()) throw ParameterError("no sequences to rank");
  auto score = [alpha](const std::pair<std::vector<TokenId>, double>& s) {
    return -s.second / std::pow((5.0 + static_cast<double>(s.first.size())) / 6.0, alpha);
  };
  size_t best = 0;
  for (size_t i = 1; i < sequences.size(); ++i) {
    double si = score(sequences[i]);
    double sb = score(sequences[best]);
    if (si > sb || (si == sb && sequences[i].first < sequences[best].first)) best = i;
  }
  return best;
}

struct NGramConfig {
  int order = 3;            // context length is order - 1, BOS padded
  double delta = 0.01;      // add-delta smoothing
  double lambda = 0.25;     // mixture weight of the source-copy distribution
  double chain_bias = 0.0;  // grounding weight toward chain tokens after [SUMMARY]

  void validate() const {
    if (order < 2 || order > 4) throw ParameterError("n-gram order must be in [2, 4]");
    if (!(delta > 0.0)) throw ParameterError("smoothing delta must be > 0");
    if (lambda < 0.0 || lambda > 1.0) throw ParameterError("lambda must lie in [0, 1]");
    if (chain_bias < 0.0 || chain_bias > 1.0) {
      throw ParameterError("chain_bias must lie in [0, 1]");
    }
    if (lambda + chain_bias > 1.0) {
      throw ParameterError("lambda + chain_bias must not exceed 1");
    }
  }
};

// What the trainer feeds the model: full planned targets, or bare summaries
// for a plan-free baseline.
enum class TargetFormat { kPlanAndSummary, kSummaryOnly };

class PlanNGramModel : public ConditionalModel {
 public:
  PlanNGramModel(Vocabulary vocab, NGramConfig config)
      : vocab_(std::move(vocab)), config_(config) {
    config_.validate();
  }

  const NGramConfig& config() const { return config_; }

  // Counts the n-grams of one EOS-terminated target sequence.
  void observe(const std::vector<TokenId>& target) {
    std::vector<TokenId> ctx(static_cast<size_t>(config_.order - 1), Vocabulary::kBos);
    for (TokenId id : target) {
      ++counts_[ctx][id];
      ++totals_[ctx];
      ctx.erase(ctx.begin());
      ctx.push_back(id);
    }
  }

  TokenDistribution next_distribution(const Document& input,
                                      std::span<const TokenId> prefix) const override {
    const size_t v = vocab_.size();
    TokenDistribution out;
    out.probs.assign(v, 0.0);

    // Smoothed n-gram component.
    std::vector<TokenId> ctx(static_cast<size_t>(config_.order - 1), Vocabulary::kBos);
    size_t take = std::min(prefix.size(), ctx.size());
    for (size_t i = 0; i < take; ++i) {
      ctx[ctx.size() - take + i] = prefix[prefix.size() - take + i];
    }
    auto counts_it = counts_.find(ctx);
    auto totals_it = totals_.find(ctx);
    double total = totals_it != totals_.end() ? static_cast<double>(totals_it->second) : 0.0;
    double denom = total + config_.delta * static_cast<double>(v);

    // Grounding component: uniform over the chain tokens already generated,
    // once the prefix has crossed into the summary region.
    std::unordered_set<TokenId> chain_ids;
    bool in_summary = false;
    for (TokenId id : prefix) {
      if (id == Vocabulary::kSummaryMark) {
        in_summary = true;
        break;
      }
      if (id != Vocabulary::kContentMark && id != Vocabulary::kEntitySep &&
          id != Vocabulary::kSentenceSep) {
        chain_ids.insert(id);
      }
    }
    double mu = (in_summary && !chain_ids.empty()) ? config_.chain_bias : 0.0;

    // Copy component: uniform over distinct source ids plus the structural
    // tokens a planned target needs.
    std::unordered_set<TokenId> copy_ids;
    for (TokenId id : tokenize(input.source, vocab_)) copy_ids.insert(id);
    for (TokenId id : {Vocabulary::kEos, Vocabulary::kContentMark, Vocabulary::kSummaryMark,
                       Vocabulary::kEntitySep, Vocabulary::kSentenceSep}) {
      copy_ids.insert(id);
    }

    double w_base = 1.0 - config_.lambda - mu;
    double copy_p = config_.lambda / static_cast<double>(copy_ids.size());
    double chain_p = mu > 0.0 ? mu / static_cast<double>(chain_ids.size()) : 0.0;

    for (size_t id = 0; id < v; ++id) {
      double count = 0.0;
      if (counts_it != counts_.end()) {
        auto it = counts_it->second.find(static_cast<TokenId>(id));
        if (it != counts_it->second.end()) count = static_cast<double>(it->second);
      }
      out.probs[id] = w_base * (count + config_.delta) / denom;
    }
    for (TokenId id : copy_ids) out.probs[static_cast<size_t>(id)] += copy_p;
    if (mu > 0.0) {
      for (TokenId id : chain_ids) out.probs[static_cast<size_t>(id)] += chain_p;
    }
    return out;
  }

  const Vocabulary& vocabulary() const override { return vocab_; }

  void save(std::ostream& os) const {
    os << "divdec-ngram v1\n";
    os << "order " << config_.order << '\n';
    os << "delta " << config_.delta << '\n';
    os << "lambda " << config_.lambda << '\n';
    os << "chain_bias " << config_.chain_bias << '\n';
    os << "vocab " << vocab_.size() << '\n';
    for (size_t id = 0; id < vocab_.size(); ++id) {
      os << vocab_.token(static_cast<TokenId>(id)) << '\n';
    }
    size_t rows = 0;
    for (const auto& [ctx, next] : counts_) rows += next.size();
    os << "counts " << rows << '\n';
    for (const auto& [ctx, next] : counts_) {
      for (const auto& [tok, count] : next) {
        for (TokenId id : ctx) os << id << ' ';
        os << tok << ' ' << count << '\n';
      }
    }
  }

  static PlanNGramModel load(std::istream& is) {
    auto fail = [](const std::string& what) -> void {
      throw CorpusError("n-gram model file: " + what);
    };
    std::string line;
    if (!std::getline(is, line) || line != "divdec-ngram v1") fail("bad magic line");

    NGramConfig config;
    auto read_kv = [&](std::string_view key, auto& value) {
      if (!std::getline(is, line)) fail("truncated header");
      std::istringstream ss(line);
      std::string k;
      if (!(ss >> k >> value) || k != key) fail("expected '" + std::string(key) + "' line");
    };
    read_kv("order", config.order);
    read_kv("delta", config.delta);
    read_kv("lambda", config.lambda);
    read_kv("chain_bias", config.chain_bias);

    size_t vocab_size = 0;
    read_kv("vocab", vocab_size);
    if (vocab_size < static_cast<size_t>(Vocabulary::kNumReserved)) fail("vocab too small");
    Vocabulary vocab;
    for (size_t i = 0; i < vocab_size; ++i) {
      if (!std::getline(is, line) || line.empty()) fail("truncated vocab section");
      if (i < static_cast<size_t>(Vocabulary::kNumReserved)) {
        if (line != vocab.token(static_cast<TokenId>(i))) fail("reserved token mismatch");
      } else {
        vocab.add(line);
      }
    }
    if (vocab.size() != vocab_size) fail("duplicate token in vocab section");

    size_t rows = 0;
    read_kv("counts", rows);
    PlanNGramModel model(std::move(vocab), config);
    for (size_t r = 0; r < rows; ++r) {
      if (!std::getline(is, line)) fail("truncated counts section");
      std::istringstream ss(line);
      std::vector<TokenId> ctx(static_cast<size_t>(config.order - 1));
      for (TokenId& id : ctx) {
        if (!(ss >> id)) fail("short count row " + std::to_string(r));
      }
      TokenId tok;
      std::uint64_t count;
      if (!(ss >> tok >> count)) fail("short count row " + std::to_string(r));
      model.counts_[ctx][tok] = count;
      model.totals_[ctx] += count;
    }
    return model;
  }

 private:
  Vocabulary vocab_;
  NGramConfig config_;
  std::map<std::vector<TokenId>, std::map<TokenId, std::uint64_t>> counts_;
  std::map<std::vector<TokenId>, std::uint64_t> totals_;
};

// Builds the vocabulary from the corpus and counts each document's planned
// target (or bare reference). Documents without a reference are skipped.
inline PlanNGramModel train_plan_ngram(const std::vector<Document>& corpus,
                                       const NGramConfig& config,
                                       TargetFormat format = TargetFormat::kPlanAndSummary) {
  config.validate();
  Vocabulary vocab;
  std::vector<std::pair<const Document*, std::string>> targets;
  for (const Document& doc : corpus) {
    for (const auto& tok : plan::detail::whitespace_tokens(doc.source)) vocab.add(tok);
    if (!doc.reference) continue;
    plan::Composition chain = plan::canonical(
        doc.reference_chain ? *doc.reference_chain : plan::build_chain(*doc.reference));
    std::string target =
        format == TargetFormat::kPlanAndSummary
            ? plan::serialize_planned_target({std::move(chain), *doc.reference})
            : *doc.reference;
    for (const auto& tok : plan::detail::whitespace_tokens(target)) vocab.add(tok);
    targets.emplace_back(&doc, std::move(target));
  }

  PlanNGramModel model(std::move(vocab), config);
  const Vocabulary& v = model.vocabulary();
  for (const auto& [doc, target] : targets) {
    std::vector<TokenId> ids = tokenize(target, v);
    ids.push_back(Vocabulary::kEos);
    model.observe(ids);
  }
  return model;
}

}  // namespace divdec::toy

#endif  // DIVDEC_TOYMODEL_HPP_
