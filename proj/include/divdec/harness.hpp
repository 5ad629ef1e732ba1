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
 * Experiment harness: corpus and model I/O, the decode loop, metric
 * aggregation, parameter sweeps, and report rendering.
 *
 * Determinism contract: with a fixed config, prediction and report files
 * are byte-identical across runs and across worker counts. Decode units
 * (document x strategy) run on a bounded worker pool into preallocated
 * slots; sampling substreams are derived from (seed, document id, sample
 * index) and never from scheduling order; files are written by the main
 * thread in a fixed order, via a temp file and an atomic rename.
 */

#ifndef DIVDEC_HARNESS_HPP_
#define DIVDEC_HARNESS_HPP_

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <iterator>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "json.hpp"

#include "divdec/core.hpp"
#include "divdec/decode.hpp"
#include "divdec/metrics.hpp"
#include "divdec/plan.hpp"
#include "divdec/rng.hpp"
#include "divdec/scorer_client.hpp"
#include "divdec/toymodel.hpp"

namespace divdec::harness {

struct NGramTrainSpec {
  toy::NGramConfig config;
  toy::TargetFormat format = toy::TargetFormat::kPlanAndSummary;
};

struct ExperimentConfig {
  std::string corpus_path;
  std::string model_path;               // n-gram dump or table-model JSON
  std::optional<NGramTrainSpec> train;  // train on the corpus instead of loading
  std::vector<DecodeParams> strategies;
  std::string output_dir;
  std::optional<std::string> scorer_endpoint;  // falls back to the env variable
  double scorer_timeout_seconds = 5.0;
  std::uint64_t seed = 0;
  int workers = 1;
  bool challenge_only = false;

  void validate() const {
    if (strategies.empty()) throw ParameterError("config lists no decoding strategies");
    std::set<Strategy> seen;
    for (const DecodeParams& p : strategies) {
      p.validate();
      if (!seen.insert(p.strategy).second) {
        throw ParameterError("duplicate strategy in config: " +
                             std::string(to_string(p.strategy)));
      }
    }
    if (workers < 1) throw ParameterError("workers must be >= 1");
    if (!(scorer_timeout_seconds > 0.0)) {
      throw ParameterError("scorer timeout must be positive");
    }
  }
};

struct PredictionRecord {
  std::string doc_id;
  std::string strategy;
  int sample_index = 0;
  std::string text;         // full decoded text, plan markers included
  std::string summary;      // output region only
  std::string composition;  // serialized chain, empty when there is none
  double nll = 0.0;
  double mean_nll = 0.0;
  bool truncated = false;
  bool malformed_retry = false;
};

// ---------------------------------------------------------------------------
// Corpus and model files

inline std::vector<Document> load_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CorpusError("cannot open corpus file: " + path);

  std::vector<Document> docs;
  std::set<std::string> ids;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto fail = [&](const std::string& what) -> void {
      throw CorpusError(path + ":" + std::to_string(line_no) + ": " + what);
    };
    nlohmann::json row = nlohmann::json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (row.is_discarded() || !row.is_object()) fail("line is not a JSON object");
    for (const auto& [key, value] : row.items()) {
      if (key != "id" && key != "source" && key != "reference" && key != "chain" &&
          key != "answer") {
        fail("unknown field '" + key + "'");
      }
      if (!value.is_string()) fail("field '" + key + "' must be a string");
    }
    if (!row.contains("id") || row["id"].get<std::string>().empty()) {
      fail("missing or empty 'id'");
    }
    if (!row.contains("source")) fail("missing 'source'");

    Document doc;
    doc.id = row["id"].get<std::string>();
    doc.source = row["source"].get<std::string>();
    if (!ids.insert(doc.id).second) fail("duplicate document id '" + doc.id + "'");
    if (row.contains("reference")) doc.reference = row["reference"].get<std::string>();
    if (row.contains("chain")) {
      doc.reference_chain = plan::parse_chain(row["chain"].get<std::string>());
    }
    if (row.contains("answer")) doc.answer_span = row["answer"].get<std::string>();
    docs.push_back(std::move(doc));
  }
  return docs;
}

// Keeps documents whose gold chain names at least one entity the source does
// not support. Documents without a reference are dropped.
inline std::vector<Document> filter_challenge(const std::vector<Document>& docs) {
  std::vector<Document> kept;
  for (const Document& doc : docs) {
    if (!doc.reference) continue;
    plan::Composition chain =
        doc.reference_chain ? *doc.reference_chain : plan::build_chain(*doc.reference);
    bool unsupported = false;
    for (const auto& sentence : chain.sentences) {
      for (const auto& entity : sentence) {
        if (!plan::entity_supported(entity, doc.source)) {
          unsupported = true;
          break;
        }
      }
      if (unsupported) break;
    }
    if (unsupported) kept.push_back(doc);
  }
  return kept;
}

inline toy::TableModel load_table_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CorpusError("cannot open model file: " + path);
  nlohmann::json spec = nlohmann::json::parse(in, nullptr, /*allow_exceptions=*/false);
  if (spec.is_discarded() || !spec.is_object() || spec.value("type", "") != "table") {
    throw CorpusError("model file is not a table-model JSON object: " + path);
  }

  Vocabulary vocab;
  for (const auto& tok : spec.value("tokens", nlohmann::json::array())) {
    vocab.add(tok.get<std::string>());
  }

  auto to_distribution = [&](const nlohmann::json& probs) {
    TokenDistribution d;
    d.probs.assign(vocab.size(), 0.0);
    for (const auto& [tok, p] : probs.items()) {
      auto id = vocab.id_of(tok);
      if (!id) throw CorpusError(path + ": probability for unknown token '" + tok + "'");
      d.probs[static_cast<size_t>(*id)] = p.get<double>();
    }
    return d;
  };

  if (!spec.contains("default")) throw CorpusError(path + ": missing 'default' distribution");
  toy::TableModel model(vocab, to_distribution(spec["default"]));
  for (const auto& row : spec.value("rows", nlohmann::json::array())) {
    model.set(row.value("doc", ""), tokenize(row.value("prefix", ""), vocab),
              to_distribution(row.at("probs")));
  }
  return model;
}

inline std::unique_ptr<ConditionalModel> load_model(const std::string& path) {
  {
    std::ifstream probe(path);
    if (!probe) throw CorpusError("cannot open model file: " + path);
    std::string first;
    std::getline(probe, first);
    if (first.rfind("divdec-ngram", 0) == 0) {
      std::ifstream in(path);
      return std::make_unique<toy::PlanNGramModel>(toy::PlanNGramModel::load(in));
    }
  }
  return std::make_unique<toy::TableModel>(load_table_model(path));
}

// ---------------------------------------------------------------------------
// Decoding

namespace detail {

// Splits decoded text into (summary, serialized chain); text without a
// well-formed plan counts entirely as summary.
inline std::pair<std::string, std::string> split_planned_text(const std::string& text) {
  try {
    plan::PlannedTarget target = plan::parse_planned_target(text);
    return {target.output_text, plan::serialize_composition(target.composition)};
  } catch (const MalformedPlanError&) {
    return {text, ""};
  }
}

inline PredictionRecord to_record(const Document& doc, const DecodeParams& params,
                                  int sample_index, const Hypothesis& hyp,
                                  bool malformed_retry) {
  PredictionRecord rec;
  rec.doc_id = doc.id;
  rec.strategy = std::string(to_string(params.strategy));
  rec.sample_index = sample_index;
  rec.text = hyp.text;
  if (hyp.composition) {
    rec.composition = plan::serialize_composition(*hyp.composition);
    rec.summary = split_planned_text(hyp.text).first;
  } else {
    auto [summary, chain] = split_planned_text(hyp.text);
    rec.summary = summary;
    rec.composition = chain;
  }
  rec.nll = hyp.nll;
  rec.mean_nll = hyp.mean_nll();
  rec.truncated = hyp.truncated;
  rec.malformed_retry = malformed_retry;
  return rec;
}

// All samples for one (document, strategy) decode unit.
inline std::vector<PredictionRecord> decode_unit(const ConditionalModel& model,
                                                 const Document& doc, const DecodeParams& params,
                                                 std::uint64_t seed) {
  std::vector<PredictionRecord> records;
  records.reserve(static_cast<size_t>(params.num_samples));

  switch (params.strategy) {
    case Strategy::kBeam: {
      std::vector<Hypothesis> hyps =
          decode::beam_search(model, doc, params.beam_size, params.length_penalty_alpha,
                              params.max_len);
      for (int s = 0; s < params.num_samples; ++s) {
        records.push_back(to_record(doc, params, s, hyps.front(), false));
      }
      break;
    }
    case Strategy::kTemperature:
    case Strategy::kTopK:
    case Strategy::kNucleus: {
      decode::DistributionTransform transform =
          params.strategy == Strategy::kTemperature
              ? decode::DistributionTransform::with_temperature(params.temperature)
              : (params.strategy == Strategy::kTopK
                     ? decode::DistributionTransform::with_top_k(params.top_k)
                     : decode::DistributionTransform::with_nucleus(params.nucleus_p));
      for (int s = 0; s < params.num_samples; ++s) {
        SamplerState state =
            SamplerState::for_sample(seed, doc.id, static_cast<std::uint64_t>(s));
        Hypothesis hyp = decode::ancestral_sample(model, doc, transform, params.max_len, state);
        records.push_back(to_record(doc, params, s, hyp, false));
      }
      break;
    }
    case Strategy::kFocus: {
      const Vocabulary& vocab = model.vocabulary();
      std::vector<double> relevance(vocab.size(), 0.0);
      for (TokenId id : tokenize(doc.source, vocab)) {
        relevance[static_cast<size_t>(id)] = 1.0;
      }
      for (int s = 0; s < params.num_samples; ++s) {
        SamplerState state =
            SamplerState::for_sample(seed, doc.id, static_cast<std::uint64_t>(s));
        std::vector<TokenId> subset =
            decode::sample_vocab_subset(relevance, params.top_k, state);
        std::vector<Hypothesis> hyps = decode::restricted_beam_search(
            model, doc, subset, params.beam_size, params.length_penalty_alpha, params.max_len);
        records.push_back(to_record(doc, params, s, hyps.front(), false));
      }
      break;
    }
    case Strategy::kComposition:
    case Strategy::kCompositionConstrained: {
      bool constrained = params.strategy == Strategy::kCompositionConstrained;
      for (int s = 0; s < params.num_samples; ++s) {
        SamplerState state =
            SamplerState::for_sample(seed, doc.id, static_cast<std::uint64_t>(s));
        bool retried = false;
        Hypothesis hyp = decode::composition_sample_retrying(model, doc, params, state,
                                                             constrained, &retried);
        records.push_back(to_record(doc, params, s, hyp, retried));
      }
      break;
    }
  }
  return records;
}

// Runs fn(0..n-1) on `workers` threads; slots are claimed via an atomic
// counter, so output placement never depends on scheduling.
template <typename Fn>
void parallel_for(size_t n, int workers, Fn&& fn) {
  if (workers <= 1 || n <= 1) {
    for (size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto body = [&]() {
    while (true) {
      size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  size_t spawn = std::min<size_t>(static_cast<size_t>(workers), n);
  pool.reserve(spawn);
  for (size_t t = 0; t < spawn; ++t) pool.emplace_back(body);
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace detail

struct ExperimentResult {
  std::vector<PredictionRecord> predictions;
  std::vector<metrics::SampleSetReport> per_doc;
  std::vector<metrics::AggregateRow> aggregates;
  bool scorer_fallback = false;
};

// ---------------------------------------------------------------------------
// Metrics over prediction records

inline std::vector<PredictionRecord> load_predictions(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CorpusError("cannot open predictions file: " + path);
  std::vector<PredictionRecord> records;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json row = nlohmann::json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (row.is_discarded() || !row.is_object()) {
      throw CorpusError(path + ":" + std::to_string(line_no) + ": line is not a JSON object");
    }
    try {
      PredictionRecord rec;
      rec.doc_id = row.at("doc_id").get<std::string>();
      rec.strategy = row.at("strategy").get<std::string>();
      rec.sample_index = row.at("sample_index").get<int>();
      rec.text = row.at("text").get<std::string>();
      rec.summary = row.at("summary").get<std::string>();
      rec.composition = row.at("composition").get<std::string>();
      rec.nll = row.at("nll").get<double>();
      rec.mean_nll = row.at("mean_nll").get<double>();
      rec.truncated = row.at("truncated").get<bool>();
      rec.malformed_retry = row.at("malformed_retry").get<bool>();
      records.push_back(std::move(rec));
    } catch (const nlohmann::json::exception& e) {
      throw CorpusError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return records;
}

// Groups records by strategy (first-seen order) and document (corpus
// order), computes one SampleSetReport per group.
inline std::vector<metrics::SampleSetReport> evaluate_predictions(
    const std::vector<Document>& corpus, const std::vector<PredictionRecord>& records,
    const metrics::PairwiseScorer& entailment_scorer,
    const metrics::PairwiseScorer& similarity_scorer) {
  std::map<std::string, const Document*> by_id;
  for (const Document& doc : corpus) by_id[doc.id] = &doc;

  std::vector<std::string> strategy_order;
  std::map<std::string, std::map<std::string, std::vector<const PredictionRecord*>>> groups;
  for (const PredictionRecord& rec : records) {
    if (!groups.count(rec.strategy)) strategy_order.push_back(rec.strategy);
    groups[rec.strategy][rec.doc_id].push_back(&rec);
  }

  std::vector<metrics::SampleSetReport> reports;
  for (const std::string& strategy : strategy_order) {
    for (const Document& doc : corpus) {
      auto it = groups[strategy].find(doc.id);
      if (it == groups[strategy].end()) continue;
      std::vector<const PredictionRecord*> recs = it->second;
      std::sort(recs.begin(), recs.end(),
                [](const PredictionRecord* a, const PredictionRecord* b) {
                  return a->sample_index < b->sample_index;
                });
      metrics::SampleSetInputs in;
      in.doc_id = doc.id;
      in.strategy = strategy;
      in.source = doc.source;
      in.reference = doc.reference;
      in.deterministic = is_deterministic(parse_strategy(strategy));
      for (const PredictionRecord* rec : recs) {
        in.summaries.push_back(rec->summary);
        in.sample_mean_nlls.push_back(rec->mean_nll);
        if (rec->malformed_retry) ++in.malformed_retries;
      }
      reports.push_back(
          metrics::compute_sample_set_report(in, entailment_scorer, similarity_scorer));
    }
  }
  return reports;
}

// ---------------------------------------------------------------------------
// The experiment driver

inline ExperimentResult run_experiment(const ExperimentConfig& config,
                                       const std::vector<Document>& corpus,
                                       const ConditionalModel& model) {
  config.validate();
  const std::vector<Document> docs =
      config.challenge_only ? filter_challenge(corpus) : corpus;
  if (docs.empty()) throw CorpusError("experiment corpus is empty after filtering");

  // Decode in parallel into preallocated (strategy, doc) slots.
  struct Unit {
    const DecodeParams* params;
    const Document* doc;
  };
  std::vector<Unit> units;
  units.reserve(config.strategies.size() * docs.size());
  for (const DecodeParams& params : config.strategies) {
    for (const Document& doc : docs) units.push_back({&params, &doc});
  }
  std::vector<std::vector<PredictionRecord>> slots(units.size());
  detail::parallel_for(units.size(), config.workers, [&](size_t i) {
    slots[i] = detail::decode_unit(model, *units[i].doc, *units[i].params, config.seed);
  });

  ExperimentResult result;
  for (auto& slot : slots) {
    for (auto& rec : slot) result.predictions.push_back(std::move(rec));
  }

  // Metrics, single-threaded.
  std::optional<std::string> endpoint = config.scorer_endpoint;
  if (!endpoint) endpoint = metrics::scorer_endpoint_from_env();
  metrics::ExternalScorerClient client(
      metrics::ScorerConfig{endpoint.value_or(""), config.scorer_timeout_seconds});

  std::unique_ptr<metrics::PairwiseScorer> entailment_scorer;
  std::unique_ptr<metrics::PairwiseScorer> similarity_scorer;
  if (client.enabled()) {
    entailment_scorer = std::make_unique<metrics::ExternalEntailmentScorer>(&client);
    similarity_scorer = std::make_unique<metrics::ExternalSimilarityScorer>(&client);
  } else {
    entailment_scorer = std::make_unique<metrics::LexicalEntailmentScorer>();
    similarity_scorer = std::make_unique<metrics::UnigramSimilarityScorer>();
  }

  result.per_doc =
      evaluate_predictions(docs, result.predictions, *entailment_scorer, *similarity_scorer);
  result.scorer_fallback = client.fallback_used();
  if (result.scorer_fallback) {
    for (auto& report : result.per_doc) report.scorer_fallback = true;
  }

  for (const DecodeParams& params : config.strategies) {
    std::vector<metrics::SampleSetReport> group;
    for (const auto& report : result.per_doc) {
      if (report.strategy == to_string(params.strategy)) group.push_back(report);
    }
    result.aggregates.push_back(metrics::aggregate_report(group));
  }
  return result;
}

// ---------------------------------------------------------------------------
// Rendering and file output

namespace detail {

inline std::string fmt(double v, int precision) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", precision, v);
  return buf;
}

inline std::string fmt_opt(const std::optional<double>& v, int precision) {
  return v ? fmt(*v, precision) : std::string("-");
}

inline std::string csv_opt(const std::optional<double>& v) {
  return v ? fmt(*v, 6) : std::string();
}

inline void write_text_file_atomic(const std::string& path, const std::string& content) {
  std::filesystem::path target(path);
  if (target.has_parent_path()) std::filesystem::create_directories(target.parent_path());
  std::filesystem::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out << content;
  }
  std::filesystem::rename(tmp, target);
}

inline nlohmann::ordered_json record_to_json(const PredictionRecord& rec) {
  nlohmann::ordered_json row;
  row["doc_id"] = rec.doc_id;
  row["strategy"] = rec.strategy;
  row["sample_index"] = rec.sample_index;
  row["text"] = rec.text;
  row["summary"] = rec.summary;
  row["composition"] = rec.composition;
  row["nll"] = rec.nll;
  row["mean_nll"] = rec.mean_nll;
  row["truncated"] = rec.truncated;
  row["malformed_retry"] = rec.malformed_retry;
  return row;
}

inline nlohmann::ordered_json report_to_json(const metrics::SampleSetReport& r) {
  nlohmann::ordered_json row;
  auto opt = [](const std::optional<double>& v) {
    return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
  };
  row["doc_id"] = r.doc_id;
  row["strategy"] = r.strategy;
  row["num_samples"] = r.num_samples;
  row["deterministic"] = r.deterministic;
  row["mean_nll"] = r.mean_nll;
  row["true_ppl"] = r.true_ppl;
  row["rouge_l"] = opt(r.rouge_l);
  row["bleu_4"] = opt(r.bleu_4);
  row["oracle_bleu_4"] = opt(r.oracle_bleu_4);
  row["similarity"] = opt(r.similarity);
  row["entailment"] = r.entailment;
  row["unique_samples"] = r.unique_samples;
  row["self_bleu"] = opt(r.self_bleu);
  row["self_entailment"] = opt(r.self_entailment);
  row["self_similarity"] = opt(r.self_similarity);
  row["edna"] = opt(r.edna_score);
  row["malformed_retries"] = r.malformed_retries;
  row["scorer_fallback"] = r.scorer_fallback;
  return row;
}

}  // namespace detail

struct RenderedReport {
  std::string text;
  std::string csv;
};

// Fixed-order corpus-level table. Diversity columns of deterministic
// single-hypothesis strategies still aggregate their degenerate values; the
// text table prints them as given.
inline RenderedReport render_report(const std::vector<metrics::AggregateRow>& rows) {
  static constexpr const char* kColumns[] = {
      "strategy", "docs", "ppl",  "RL",    "B4",    "Sim",  "Ent",
      "Uniq",     "S-BL", "S-Ent", "S-Sim", "EDNA", "O-B4"};

  std::vector<std::vector<std::string>> cells;
  for (const auto& row : rows) {
    cells.push_back({row.strategy, std::to_string(row.num_docs),
                     detail::fmt(row.mean_nll, 4), detail::fmt_opt(row.rouge_l, 4),
                     detail::fmt_opt(row.bleu_4, 2), detail::fmt_opt(row.similarity, 4),
                     detail::fmt(row.entailment, 4), detail::fmt(row.unique_samples, 2),
                     detail::fmt_opt(row.self_bleu, 2),
                     detail::fmt_opt(row.self_entailment, 4),
                     detail::fmt_opt(row.self_similarity, 4),
                     detail::fmt_opt(row.edna_score, 4),
                     detail::fmt_opt(row.oracle_bleu_4, 2)});
  }

  size_t ncol = std::size(kColumns);
  std::vector<size_t> width(ncol);
  for (size_t c = 0; c < ncol; ++c) width[c] = std::string(kColumns[c]).size();
  for (const auto& row : cells) {
    for (size_t c = 0; c < ncol; ++c) width[c] = std::max(width[c], row[c].size());
  }

  std::string text;
  auto emit_row = [&](const std::vector<std::string>& row) {
    for (size_t c = 0; c < ncol; ++c) {
      if (c > 0) text += "  ";
      text += row[c];
      text.append(width[c] - row[c].size(), ' ');
    }
    while (!text.empty() && text.back() == ' ') text.pop_back();
    text += '\n';
  };
  std::vector<std::string> header(kColumns, kColumns + ncol);
  emit_row(header);
  {
    std::vector<std::string> rule;
    for (size_t c = 0; c < ncol; ++c) rule.emplace_back(width[c], '-');
    emit_row(rule);
  }
  for (const auto& row : cells) emit_row(row);

  std::string csv =
      "strategy,num_docs,ppl,true_ppl,rouge_l,bleu_4,similarity,entailment,unique,"
      "self_bleu,self_entailment,self_similarity,edna,oracle_bleu_4,malformed_retries,"
      "scorer_fallback\n";
  for (const auto& row : rows) {
    csv += row.strategy;
    csv += ',' + std::to_string(row.num_docs);
    csv += ',' + detail::fmt(row.mean_nll, 6);
    csv += ',' + detail::fmt(row.true_ppl, 6);
    csv += ',' + detail::csv_opt(row.rouge_l);
    csv += ',' + detail::csv_opt(row.bleu_4);
    csv += ',' + detail::csv_opt(row.similarity);
    csv += ',' + detail::fmt(row.entailment, 6);
    csv += ',' + detail::fmt(row.unique_samples, 6);
    csv += ',' + detail::csv_opt(row.self_bleu);
    csv += ',' + detail::csv_opt(row.self_entailment);
    csv += ',' + detail::csv_opt(row.self_similarity);
    csv += ',' + detail::csv_opt(row.edna_score);
    csv += ',' + detail::csv_opt(row.oracle_bleu_4);
    csv += ',' + std::to_string(row.malformed_retries);
    csv += ',' + std::string(row.scorer_fallback ? "1" : "0");
    csv += '\n';
  }
  return {std::move(text), std::move(csv)};
}

inline void write_experiment_outputs(const ExperimentResult& result,
                                     const std::string& output_dir) {
  std::string predictions;
  for (const auto& rec : result.predictions) {
    predictions += detail::record_to_json(rec).dump();
    predictions += '\n';
  }
  std::string reports;
  for (const auto& report : result.per_doc) {
    reports += detail::report_to_json(report).dump();
    reports += '\n';
  }
  RenderedReport rendered = render_report(result.aggregates);

  std::filesystem::path dir(output_dir);
  detail::write_text_file_atomic((dir / "predictions.jsonl").string(), predictions);
  detail::write_text_file_atomic((dir / "per_doc_reports.jsonl").string(), reports);
  detail::write_text_file_atomic((dir / "report.txt").string(), rendered.text);
  detail::write_text_file_atomic((dir / "report.csv").string(), rendered.csv);
}

// Post-hoc validation over emitted files: every report row within bounds,
// every composition prediction's text round-trips to its recorded chain.
inline void validate_output_dir(const std::string& output_dir) {
  std::filesystem::path dir(output_dir);

  for (const PredictionRecord& rec :
       load_predictions((dir / "predictions.jsonl").string())) {
    if (rec.strategy == "composition" || rec.strategy == "composition_constrained") {
      plan::PlannedTarget target = plan::parse_planned_target(rec.text);
      if (plan::serialize_composition(target.composition) != rec.composition) {
        throw CorpusError("prediction for document '" + rec.doc_id +
                          "' does not round-trip its composition");
      }
    }
  }

  std::ifstream in(dir / "per_doc_reports.jsonl");
  if (!in) throw CorpusError("cannot open emitted reports for validation");
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json row = nlohmann::json::parse(line);
    metrics::SampleSetReport r;
    auto opt = [&](const char* key) -> std::optional<double> {
      if (row[key].is_null()) return std::nullopt;
      return row[key].get<double>();
    };
    r.doc_id = row["doc_id"].get<std::string>();
    r.strategy = row["strategy"].get<std::string>();
    r.num_samples = row["num_samples"].get<int>();
    r.deterministic = row["deterministic"].get<bool>();
    r.mean_nll = row["mean_nll"].get<double>();
    r.true_ppl = row["true_ppl"].get<double>();
    r.rouge_l = opt("rouge_l");
    r.bleu_4 = opt("bleu_4");
    r.oracle_bleu_4 = opt("oracle_bleu_4");
    r.similarity = opt("similarity");
    r.entailment = row["entailment"].get<double>();
    r.unique_samples = row["unique_samples"].get<int>();
    r.self_bleu = opt("self_bleu");
    r.self_entailment = opt("self_entailment");
    r.self_similarity = opt("self_similarity");
    r.edna_score = opt("edna");
    r.malformed_retries = row["malformed_retries"].get<int>();
    r.scorer_fallback = row["scorer_fallback"].get<bool>();
    metrics::validate_report(r);
  }
}

// Load, decode, evaluate, write, validate. The file-writing entry point the
// CLI uses.
inline ExperimentResult run_experiment(const ExperimentConfig& config) {
  config.validate();
  std::vector<Document> corpus = load_corpus(config.corpus_path);

  std::unique_ptr<ConditionalModel> owned;
  const ConditionalModel* model = nullptr;
  if (config.train) {
    owned = std::make_unique<toy::PlanNGramModel>(
        toy::train_plan_ngram(corpus, config.train->config, config.train->format));
    model = owned.get();
  } else {
    if (config.model_path.empty()) {
      throw ParameterError("config needs a model_path or an n-gram training spec");
    }
    owned = load_model(config.model_path);
    model = owned.get();
  }

  ExperimentResult result = run_experiment(config, corpus, *model);
  if (!config.output_dir.empty()) {
    write_experiment_outputs(result, config.output_dir);
    validate_output_dir(config.output_dir);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Parameter sweeps

enum class SweepAxis { kNucleusP, kTemperature };

inline std::string_view to_string(SweepAxis axis) {
  return axis == SweepAxis::kNucleusP ? "nucleus_p" : "temperature";
}

struct SweepRow {
  double value = 0.0;
  std::string strategy;
  double mean_nll = 0.0;
  double mean_nll_se = 0.0;
  double entailment = 0.0;
  double self_entailment = 0.0;
  double self_similarity = 0.0;
  double self_similarity_se = 0.0;
  double edna_score = 0.0;
};

struct SweepResult {
  SweepAxis axis = SweepAxis::kNucleusP;
  std::vector<SweepRow> rows;
  std::vector<std::vector<metrics::SampleSetReport>> per_value;
};

namespace detail {

inline std::pair<double, double> mean_and_se(const std::vector<double>& xs) {
  if (xs.empty()) return {0.0, 0.0};
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  if (xs.size() < 2) return {mean, 0.0};
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  var /= static_cast<double>(xs.size() - 1);
  return {mean, std::sqrt(var / static_cast<double>(xs.size()))};
}

}  // namespace detail

// Re-runs one sampling strategy per axis value and tabulates the quality /
// diversity trade-off curve.
inline SweepResult sweep(const ExperimentConfig& config, const std::vector<Document>& corpus,
                         const ConditionalModel& model, const DecodeParams& base,
                         SweepAxis axis, const std::vector<double>& values) {
  if (values.empty()) throw ParameterError("sweep needs at least one axis value");
  SweepResult result;
  result.axis = axis;
  for (double value : values) {
    DecodeParams params = base;
    if (axis == SweepAxis::kNucleusP) {
      params.nucleus_p = value;
      params.strategy = Strategy::kNucleus;
    } else {
      params.temperature = value;
      params.strategy = Strategy::kTemperature;
    }
    ExperimentConfig point = config;
    point.strategies = {params};
    ExperimentResult run = run_experiment(point, corpus, model);

    std::vector<double> nlls, self_sims;
    for (const auto& report : run.per_doc) {
      nlls.push_back(report.mean_nll);
      if (report.self_similarity) self_sims.push_back(*report.self_similarity);
    }
    auto [nll_mean, nll_se] = detail::mean_and_se(nlls);
    auto [sim_mean, sim_se] = detail::mean_and_se(self_sims);

    const metrics::AggregateRow& agg = run.aggregates.front();
    SweepRow row;
    row.value = value;
    row.strategy = agg.strategy;
    row.mean_nll = nll_mean;
    row.mean_nll_se = nll_se;
    row.entailment = agg.entailment;
    row.self_entailment = agg.self_entailment.value_or(0.0);
    row.self_similarity = sim_mean;
    row.self_similarity_se = sim_se;
    row.edna_score = agg.edna_score.value_or(0.0);
    result.rows.push_back(std::move(row));
    result.per_value.push_back(run.per_doc);
  }
  return result;
}

inline RenderedReport render_sweep(const SweepResult& result) {
  std::string axis(to_string(result.axis));
  std::string text = axis +
                     "  strategy  mean_nll  mean_nll_se  entailment  self_entailment  "
                     "self_similarity  self_similarity_se  edna\n";
  std::string csv = axis +
                    ",strategy,mean_nll,mean_nll_se,entailment,self_entailment,"
                    "self_similarity,self_similarity_se,edna\n";
  for (const auto& row : result.rows) {
    text += detail::fmt(row.value, 2) + "  " + row.strategy + "  " +
            detail::fmt(row.mean_nll, 4) + "  " + detail::fmt(row.mean_nll_se, 4) + "  " +
            detail::fmt(row.entailment, 4) + "  " + detail::fmt(row.self_entailment, 4) +
            "  " + detail::fmt(row.self_similarity, 4) + "  " +
            detail::fmt(row.self_similarity_se, 4) + "  " + detail::fmt(row.edna_score, 4) +
            '\n';
    csv += detail::fmt(row.value, 6) + ',' + row.strategy + ',' +
           detail::fmt(row.mean_nll, 6) + ',' + detail::fmt(row.mean_nll_se, 6) + ',' +
           detail::fmt(row.entailment, 6) + ',' + detail::fmt(row.self_entailment, 6) + ',' +
           detail::fmt(row.self_similarity, 6) + ',' + detail::fmt(row.self_similarity_se, 6) +
           ',' + detail::fmt(row.edna_score, 6) + '\n';
  }
  return {std::move(text), std::move(csv)};
}

}  // namespace divdec::harness

#endif  // DIVDEC_HARNESS_HPP_
