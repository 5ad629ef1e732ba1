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
 * Quality and diversity metrics over sample sets.
 *
 * Text metrics tokenize by whitespace after lowercasing. ROUGE-L,
 * entailment, similarity, and EDNA live in [0, 1]; BLEU-4 and Self-BLEU are
 * scaled to [0, 100]. Self-* metrics average a pairwise scorer over all
 * K(K-1) ordered sample pairs. EDNA is the harmonic mean of entailment and
 * one minus self-entailment, computed per document and averaged.
 */

#ifndef DIVDEC_METRICS_HPP_
#define DIVDEC_METRICS_HPP_

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "divdec/error.hpp"
#include "divdec/stopwords.hpp"

namespace divdec::metrics {

inline std::vector<std::string> text_tokens(std::string_view text, bool lowercase = true) {
  std::vector<std::string> tokens;
  size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    size_t start = i;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i > start) {
      std::string tok(text.substr(start, i - start));
      if (lowercase) {
        for (char& c : tok) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      }
      tokens.push_back(std::move(tok));
    }
  }
  return tokens;
}

inline size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  if (a.empty() || b.empty()) return 0;
  std::vector<size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (size_t i = 1; i <= a.size(); ++i) {
    for (size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

// LCS-based F1. Two empty texts count as identical.
inline double rouge_l_f1(std::string_view hypothesis, std::string_view reference) {
  std::vector<std::string> h = text_tokens(hypothesis);
  std::vector<std::string> r = text_tokens(reference);
  if (h.empty() && r.empty()) return 1.0;
  if (h.empty() || r.empty()) return 0.0;
  double lcs = static_cast<double>(lcs_length(h, r));
  double precision = lcs / static_cast<double>(h.size());
  double recall = lcs / static_cast<double>(r.size());
  if (precision + recall == 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

namespace detail {

inline std::map<std::vector<std::string>, size_t> ngram_counts(
    const std::vector<std::string>& tokens, size_t n) {
  std::map<std::vector<std::string>, size_t> counts;
  if (tokens.size() < n) return counts;
  for (size_t i = 0; i + n <= tokens.size(); ++i) {
    ++counts[{tokens.begin() + static_cast<std::ptrdiff_t>(i),
              tokens.begin() + static_cast<std::ptrdiff_t>(i + n)}];
  }
  return counts;
}

}  // namespace detail

struct BleuOptions {
  int max_order = 4;
  double epsilon = 0.1;  // floor for zero clipped counts
};

// Sentence BLEU-4 in [0, 100]: clipped modified n-gram precision with the
// epsilon floor on zero counts, orders the hypothesis is too short for are
// skipped, geometric mean, multiplicative brevity penalty.
inline double bleu4(std::string_view hypothesis, const std::vector<std::string>& references,
                    const BleuOptions& options = {}) {
  if (references.empty()) throw ParameterError("bleu4 needs at least one reference");
  std::vector<std::string> hyp = text_tokens(hypothesis);
  std::vector<std::vector<std::string>> refs;
  refs.reserve(references.size());
  for (const auto& r : references) refs.push_back(text_tokens(r));

  if (hyp.empty()) return 0.0;

  double log_precision_sum = 0.0;
  int orders_used = 0;
  for (int n = 1; n <= options.max_order; ++n) {
    auto hyp_counts = detail::ngram_counts(hyp, static_cast<size_t>(n));
    size_t total = 0;
    for (const auto& [gram, count] : hyp_counts) total += count;
    if (total == 0) continue;  // hypothesis shorter than n

    size_t clipped = 0;
    for (const auto& [gram, count] : hyp_counts) {
      size_t best_ref = 0;
      for (const auto& ref : refs) {
        auto ref_counts = detail::ngram_counts(ref, static_cast<size_t>(n));
        auto it = ref_counts.find(gram);
        if (it != ref_counts.end()) best_ref = std::max(best_ref, it->second);
      }
      clipped += std::min(count, best_ref);
    }
    double numer = clipped > 0 ? static_cast<double>(clipped) : options.epsilon;
    log_precision_sum += std::log(numer / static_cast<double>(total));
    ++orders_used;
  }
  if (orders_used == 0) return 0.0;

  // Closest reference length; ties toward the shorter reference.
  size_t c = hyp.size();
  size_t r = refs.front().size();
  for (const auto& ref : refs) {
    size_t len = ref.size();
    size_t cur = r > c ? r - c : c - r;
    size_t cand = len > c ? len - c : c - len;
    if (cand < cur || (cand == cur && len < r)) r = len;
  }
  double bp = c >= r ? 1.0 : std::exp(1.0 - static_cast<double>(r) / static_cast<double>(c));
  return 100.0 * bp * std::exp(log_precision_sum / orders_used);
}

// Mean of scorer(samples[i], samples[j]) over all ordered pairs i != j.
template <typename Scorer>
double self_metric(const std::vector<std::string>& samples, Scorer&& scorer) {
  if (samples.size() < 2) {
    throw UndefinedMetricError("self metrics need at least two samples");
  }
  double total = 0.0;
  for (size_t i = 0; i < samples.size(); ++i) {
    for (size_t j = 0; j < samples.size(); ++j) {
      if (i != j) total += scorer(samples[i], samples[j]);
    }
  }
  return total / static_cast<double>(samples.size() * (samples.size() - 1));
}

// Distinct samples after whitespace normalization.
inline int unique_count(const std::vector<std::string>& samples) {
  std::set<std::vector<std::string>> seen;
  for (const auto& s : samples) seen.insert(text_tokens(s, /*lowercase=*/false));
  return static_cast<int>(seen.size());
}

// Fraction of the hypothesis' non-stopword tokens found in the premise.
// A hypothesis with no content tokens entails trivially.
inline double lexical_entailment_proxy(std::string_view premise, std::string_view hypothesis) {
  std::vector<std::string> prem = text_tokens(premise);
  std::set<std::string> prem_set(prem.begin(), prem.end());
  size_t content = 0, supported = 0;
  for (const auto& tok : text_tokens(hypothesis)) {
    if (stopwords().count(tok)) continue;
    ++content;
    if (prem_set.count(tok)) ++supported;
  }
  if (content == 0) return 1.0;
  return static_cast<double>(supported) / static_cast<double>(content);
}

// Unigram overlap F1 (multiset intersection), the default similarity proxy.
inline double unigram_f1(std::string_view a, std::string_view b) {
  std::vector<std::string> ta = text_tokens(a);
  std::vector<std::string> tb = text_tokens(b);
  if (ta.empty() && tb.empty()) return 1.0;
  if (ta.empty() || tb.empty()) return 0.0;
  std::map<std::string, size_t> ca;
  for (const auto& t : ta) ++ca[t];
  size_t overlap = 0;
  std::map<std::string, size_t> cb;
  for (const auto& t : tb) ++cb[t];
  for (const auto& [tok, count] : ca) {
    auto it = cb.find(tok);
    if (it != cb.end()) overlap += std::min(count, it->second);
  }
  double precision = static_cast<double>(overlap) / static_cast<double>(ta.size());
  double recall = static_cast<double>(overlap) / static_cast<double>(tb.size());
  if (precision + recall == 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

// Harmonic mean of entailment and (1 - self_entailment): high only when
// samples are both faithful and mutually diverse.
inline double edna(double entailment, double self_entailment) {
  if (entailment < 0.0 || entailment > 1.0 || self_entailment < 0.0 || self_entailment > 1.0) {
    throw ParameterError("edna arguments must lie in [0, 1]");
  }
  double diversity = 1.0 - self_entailment;
  double denom = entailment + diversity;
  if (denom == 0.0) return 0.0;
  return 2.0 * entailment * diversity / denom;
}

// Best score any sample achieves against the reference.
template <typename Scorer>
double oracle_top_k(const std::vector<std::string>& samples, std::string_view reference,
                    Scorer&& scorer) {
  if (samples.empty()) throw UndefinedMetricError("oracle over an empty sample set");
  double best = scorer(samples.front(), reference);
  for (size_t i = 1; i < samples.size(); ++i) {
    best = std::max(best, scorer(samples[i], reference));
  }
  return best;
}

namespace detail {

// Ranks with ties assigned the mean of the positions they span.
inline std::vector<double> mean_ranks(const std::vector<double>& values) {
  std::vector<size_t> order(values.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size(), 0.0);
  size_t i = 0;
  while (i < order.size()) {
    size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    double rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

}  // namespace detail

// Spearman rank correlation with mean ranks on ties. Throws
// UndefinedMetricError when either side has zero rank variance.
inline double spearman(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size()) throw ParameterError("spearman needs equal-length inputs");
  if (xs.size() < 3) throw ParameterError("spearman needs at least three points");
  std::vector<double> rx = detail::mean_ranks(xs);
  std::vector<double> ry = detail::mean_ranks(ys);
  double n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (size_t i = 0; i < rx.size(); ++i) {
    mx += rx[i];
    my += ry[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) {
    throw UndefinedMetricError("spearman undefined: zero rank variance");
  }
  return sxy / std::sqrt(sxx * syy);
}

// Pairwise text scorer seam; external scorers plug in behind it, the
// lexical proxies are the defaults.
class PairwiseScorer {
 public:
  virtual ~PairwiseScorer() = default;
  virtual double score(const std::string& a, const std::string& b) const = 0;
};

// score(premise, hypothesis) via the lexical proxy.
class LexicalEntailmentScorer : public PairwiseScorer {
 public:
  double score(const std::string& premise, const std::string& hypothesis) const override {
    return lexical_entailment_proxy(premise, hypothesis);
  }
};

class UnigramSimilarityScorer : public PairwiseScorer {
 public:
  double score(const std::string& a, const std::string& b) const override {
    return unigram_f1(a, b);
  }
};

// Per-document, per-strategy metric bundle. Reference-dependent fields are
// absent when the document carries no reference; self metrics are absent for
// single-sample sets. "ppl" columns report mean token NLL in nats; true_ppl
// carries its exponential.
struct SampleSetReport {
  std::string doc_id;
  std::string strategy;
  int num_samples = 0;
  bool deterministic = false;
  double mean_nll = 0.0;
  double true_ppl = 1.0;
  std::optional<double> rouge_l;
  std::optional<double> bleu_4;
  std::optional<double> oracle_bleu_4;
  std::optional<double> similarity;
  double entailment = 0.0;
  int unique_samples = 0;
  std::optional<double> self_bleu;
  std::optional<double> self_entailment;
  std::optional<double> self_similarity;
  std::optional<double> edna_score;
  int malformed_retries = 0;
  bool scorer_fallback = false;
};

struct SampleSetInputs {
  std::string doc_id;
  std::string strategy;
  std::string source;
  std::optional<std::string> reference;
  std::vector<std::string> summaries;      // summary region text per sample
  std::vector<double> sample_mean_nlls;    // full-sequence mean NLL per sample
  bool deterministic = false;
  int malformed_retries = 0;
};

inline SampleSetReport compute_sample_set_report(const SampleSetInputs& in,
                                                 const PairwiseScorer& entailment_scorer,
                                                 const PairwiseScorer& similarity_scorer) {
  if (in.summaries.empty() || in.summaries.size() != in.sample_mean_nlls.size()) {
    throw ParameterError("sample set needs matching non-empty summaries and NLLs");
  }
  const size_t k = in.summaries.size();

  SampleSetReport r;
  r.doc_id = in.doc_id;
  r.strategy = in.strategy;
  r.num_samples = static_cast<int>(k);
  r.deterministic = in.deterministic;
  r.malformed_retries = in.malformed_retries;

  for (double nll : in.sample_mean_nlls) r.mean_nll += nll;
  r.mean_nll /= static_cast<double>(k);
  r.true_ppl = std::exp(r.mean_nll);

  double ent = 0.0;
  for (const auto& s : in.summaries) ent += entailment_scorer.score(in.source, s);
  r.entailment = ent / static_cast<double>(k);
  r.unique_samples = unique_count(in.summaries);

  if (in.reference) {
    double rl = 0.0, bl = 0.0, sim = 0.0;
    for (const auto& s : in.summaries) {
      rl += rouge_l_f1(s, *in.reference);
      bl += bleu4(s, {*in.reference});
      sim += similarity_scorer.score(s, *in.reference);
    }
    r.rouge_l = rl / static_cast<double>(k);
    r.bleu_4 = bl / static_cast<double>(k);
    r.similarity = sim / static_cast<double>(k);
    r.oracle_bleu_4 = oracle_top_k(in.summaries, *in.reference,
                                   [](const std::string& s, std::string_view ref) {
                                     return bleu4(s, {std::string(ref)});
                                   });
  }

  if (k >= 2) {
    r.self_bleu = self_metric(in.summaries, [](const std::string& a, const std::string& b) {
      return bleu4(a, {b});
    });
    r.self_entailment = self_metric(in.summaries, [&](const std::string& a, const std::string& b) {
      return entailment_scorer.score(a, b);
    });
    r.self_similarity = self_metric(in.summaries, [&](const std::string& a, const std::string& b) {
      return similarity_scorer.score(a, b);
    });
    r.edna_score = edna(r.entailment, *r.self_entailment);
  }
  return r;
}

// Column means over documents for one strategy; optional columns average
// over the documents where they are present.
struct AggregateRow {
  std::string strategy;
  int num_docs = 0;
  double mean_nll = 0.0;
  double true_ppl = 1.0;
  std::optional<double> rouge_l;
  std::optional<double> bleu_4;
  std::optional<double> oracle_bleu_4;
  std::optional<double> similarity;
  double entailment = 0.0;
  double unique_samples = 0.0;
  std::optional<double> self_bleu;
  std::optional<double> self_entailment;
  std::optional<double> self_similarity;
  std::optional<double> edna_score;
  int malformed_retries = 0;
  bool scorer_fallback = false;
};

inline AggregateRow aggregate_report(const std::vector<SampleSetReport>& reports) {
  if (reports.empty()) throw ParameterError("cannot aggregate zero reports");
  AggregateRow row;
  row.strategy = reports.front().strategy;
  row.num_docs = static_cast<int>(reports.size());

  auto mean_of = [&](auto getter) -> std::optional<double> {
    double total = 0.0;
    int n = 0;
    for (const auto& r : reports) {
      if (auto v = getter(r)) {
        total += *v;
        ++n;
      }
    }
    if (n == 0) return std::nullopt;
    return total / n;
  };

  for (const auto& r : reports) {
    if (r.strategy != row.strategy) {
      throw ParameterError("aggregate_report expects a single strategy per call");
    }
    row.mean_nll += r.mean_nll;
    row.entailment += r.entailment;
    row.unique_samples += r.unique_samples;
    row.malformed_retries += r.malformed_retries;
    row.scorer_fallback = row.scorer_fallback || r.scorer_fallback;
  }
  row.mean_nll /= reports.size();
  row.entailment /= reports.size();
  row.unique_samples /= reports.size();
  row.true_ppl = std::exp(row.mean_nll);

  row.rouge_l = mean_of([](const SampleSetReport& r) { return r.rouge_l; });
  row.bleu_4 = mean_of([](const SampleSetReport& r) { return r.bleu_4; });
  row.oracle_bleu_4 = mean_of([](const SampleSetReport& r) { return r.oracle_bleu_4; });
  row.similarity = mean_of([](const SampleSetReport& r) { return r.similarity; });
  row.self_bleu = mean_of([](const SampleSetReport& r) { return r.self_bleu; });
  row.self_entailment = mean_of([](const SampleSetReport& r) { return r.self_entailment; });
  row.self_similarity = mean_of([](const SampleSetReport& r) { return r.self_similarity; });
  row.edna_score = mean_of([](const SampleSetReport& r) { return r.edna_score; });
  return row;
}

// Bounds check every typed field; used as a post-hoc pass over emitted
// reports.
inline void validate_report(const SampleSetReport& r) {
  auto in01 = [](std::optional<double> v) { return !v || (*v >= 0.0 && *v <= 1.0); };
  auto in0100 = [](std::optional<double> v) { return !v || (*v >= 0.0 && *v <= 100.0 + 1e-9); };
  bool ok = r.num_samples >= 1 && r.unique_samples >= 1 &&
            r.unique_samples <= r.num_samples && std::isfinite(r.mean_nll) &&
            r.true_ppl >= 0.0 && r.entailment >= 0.0 && r.entailment <= 1.0 &&
            in01(r.rouge_l) && in01(r.similarity) && in01(r.self_entailment) &&
            in01(r.self_similarity) && in01(r.edna_score) && in0100(r.bleu_4) &&
            in0100(r.oracle_bleu_4) && in0100(r.self_bleu) && r.malformed_retries >= 0;
  if (ok && r.edna_score && r.self_entailment) {
    ok = std::fabs(*r.edna_score - edna(r.entailment, *r.self_entailment)) <= 1e-9;
  }
  if (!ok) {
    throw UndefinedMetricError("report for document '" + r.doc_id + "' violates metric bounds");
  }
}

}  // namespace divdec::metrics

#endif  // DIVDEC_METRICS_HPP_
