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

#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

#include "divdec/metrics.hpp"
#include "divdec/rng.hpp"

using namespace divdec;

TEST_CASE("text tokenization splits on whitespace and lowercases by default") {
  CHECK(metrics::text_tokens("The  CAT\tsat\n") ==
        std::vector<std::string>{"the", "cat", "sat"});
  CHECK(metrics::text_tokens("The CAT", false) == std::vector<std::string>{"The", "CAT"});
  CHECK(metrics::text_tokens("   ").empty());
}

TEST_CASE("LCS length on classic fixtures") {
  auto lcs = [](std::string_view a, std::string_view b) {
    return metrics::lcs_length(metrics::text_tokens(a), metrics::text_tokens(b));
  };
  CHECK(lcs("a b c b d a b", "b d c a b a") == 4);
  CHECK(lcs("a b c", "a b c") == 3);
  CHECK(lcs("a b c", "x y z") == 0);
  CHECK(lcs("", "a") == 0);
}

TEST_CASE("ROUGE-L F1 hand values") {
  // LCS = 3, precision 3/4, recall 1.
  CHECK(metrics::rouge_l_f1("a b c d", "a c d") == Catch::Approx(6.0 / 7.0));
  CHECK(metrics::rouge_l_f1("a b c", "a b c") == 1.0);
  CHECK(metrics::rouge_l_f1("A B C", "a b c") == 1.0);
  CHECK(metrics::rouge_l_f1("", "") == 1.0);
  CHECK(metrics::rouge_l_f1("", "a") == 0.0);
  CHECK(metrics::rouge_l_f1("x y", "a b") == 0.0);
}

TEST_CASE("BLEU-4 is 100 exactly on identical text") {
  CHECK(metrics::bleu4("a b c d e", {"a b c d e"}) == 100.0);
  // Hypotheses too short for the higher orders skip them instead of zeroing.
  CHECK(metrics::bleu4("a b", {"a b"}) == 100.0);
  CHECK(metrics::bleu4("a", {"a"}) == 100.0);
}

TEST_CASE("BLEU-4 epsilon floor and clipping") {
  // One unigram matches; all higher orders fall to the 0.1 floor.
  double expected = 100.0 * std::exp((std::log(1.0 / 4.0) + std::log(0.1 / 3.0) +
                                      std::log(0.1 / 2.0) + std::log(0.1 / 1.0)) /
                                     4.0);
  CHECK(metrics::bleu4("a b c d", {"a x y z"}) == Catch::Approx(expected));

  // "the" appears three times but the reference supports only one.
  double clipped = 100.0 * std::exp((std::log(1.0 / 3.0) + std::log(0.1 / 2.0) +
                                     std::log(0.1 / 1.0)) /
                                    3.0);
  CHECK(metrics::bleu4("the the the", {"the cat"}) == Catch::Approx(clipped));
}

TEST_CASE("BLEU-4 brevity penalty and reference length selection") {
  CHECK(metrics::bleu4("a b", {"a b c d"}) == Catch::Approx(100.0 * std::exp(1.0 - 2.0)));
  // Lengths 2 and 4 are equally close to 3; the tie goes to the shorter, so
  // no penalty applies.
  CHECK(metrics::bleu4("a b c", {"a b", "a b c d"}) == Catch::Approx(100.0));
  CHECK(metrics::bleu4("", {"a b"}) == 0.0);
  CHECK_THROWS_AS(metrics::bleu4("a", {}), ParameterError);
}

TEST_CASE("self metrics average ordered pairs and need two samples") {
  std::vector<std::string> identical(5, "the same text");
  double self_bleu = metrics::self_metric(
      identical, [](const std::string& a, const std::string& b) { return metrics::bleu4(a, {b}); });
  CHECK(self_bleu == 100.0);

  // An asymmetric scorer makes the ordered-pair averaging observable.
  std::vector<std::string> pair = {"alpha beta", "alpha"};
  double fwd = metrics::lexical_entailment_proxy(pair[0], pair[1]);
  double bwd = metrics::lexical_entailment_proxy(pair[1], pair[0]);
  double self_ent = metrics::self_metric(pair, [](const std::string& a, const std::string& b) {
    return metrics::lexical_entailment_proxy(a, b);
  });
  CHECK(self_ent == Catch::Approx((fwd + bwd) / 2.0));
  CHECK(fwd != bwd);

  std::vector<std::string> shuffled = {"b y", "c z", "a x"};
  std::vector<std::string> original = {"a x", "b y", "c z"};
  auto sim = [](const std::string& a, const std::string& b) { return metrics::unigram_f1(a, b); };
  CHECK(metrics::self_metric(shuffled, sim) == Catch::Approx(metrics::self_metric(original, sim)));

  CHECK_THROWS_AS(metrics::self_metric({"only one"}, sim), UndefinedMetricError);
  CHECK_THROWS_AS(metrics::self_metric({}, sim), UndefinedMetricError);
}

TEST_CASE("unique count normalizes whitespace but not case") {
  CHECK(metrics::unique_count({"a b", "a  b ", "b a"}) == 2);
  CHECK(metrics::unique_count({"A", "a"}) == 2);
  CHECK(metrics::unique_count({"same", "same", "same"}) == 1);
}

TEST_CASE("lexical entailment proxy counts supported content tokens") {
  CHECK(metrics::lexical_entailment_proxy("Liverpool beat Chelsea at Anfield",
                                          "Chelsea lost at Anfield") == Catch::Approx(2.0 / 3.0));
  CHECK(metrics::lexical_entailment_proxy("anything", "the of and") == 1.0);
  CHECK(metrics::lexical_entailment_proxy("anything", "") == 1.0);
  CHECK(metrics::lexical_entailment_proxy("x y z", "x y z") == 1.0);
  CHECK(metrics::lexical_entailment_proxy("x", "unseen words") == 0.0);
}

TEST_CASE("unigram F1 uses multiset overlap") {
  CHECK(metrics::unigram_f1("a a b", "a b b") == Catch::Approx(2.0 / 3.0));
  CHECK(metrics::unigram_f1("same text", "same text") == 1.0);
  CHECK(metrics::unigram_f1("", "") == 1.0);
  CHECK(metrics::unigram_f1("a", "") == 0.0);
  CHECK(metrics::unigram_f1("a b", "c d") == 0.0);
}

TEST_CASE("EDNA hand values and bounds") {
  CHECK(metrics::edna(0.73, 0.07) == Catch::Approx(0.81795).margin(1e-4));
  CHECK(metrics::edna(1.0, 0.0) == 1.0);
  CHECK(metrics::edna(0.0, 0.0) == 0.0);
  CHECK(metrics::edna(1.0, 1.0) == 0.0);
  CHECK_THROWS_AS(metrics::edna(-0.1, 0.5), ParameterError);
  CHECK_THROWS_AS(metrics::edna(0.5, 1.1), ParameterError);

  // Harmonic mean never exceeds the arithmetic mean of its arguments.
  for (double e = 0.0; e <= 1.0; e += 0.25) {
    for (double se = 0.0; se <= 1.0; se += 0.25) {
      double d = 1.0 - se;
      CHECK(metrics::edna(e, se) <= (e + d) / 2.0 + 1e-12);
      CHECK(metrics::edna(e, se) >= 0.0);
      CHECK(metrics::edna(e, se) <= 1.0);
    }
  }
}

TEST_CASE("oracle takes the best sample and dominates the mean") {
  auto rouge = [](const std::string& s, std::string_view ref) {
    return metrics::rouge_l_f1(s, ref);
  };
  std::vector<std::string> samples = {"a b", "a b c", "x"};
  CHECK(metrics::oracle_top_k(samples, "a b c", rouge) == 1.0);
  CHECK_THROWS_AS(metrics::oracle_top_k({}, "ref", rouge), UndefinedMetricError);

  Rng rng(17);
  const char* words[] = {"a", "b", "c", "d"};
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::string> set;
    for (int s = 0; s < 4; ++s) {
      std::string text;
      size_t len = 1 + rng.next_below(4);
      for (size_t i = 0; i < len; ++i) {
        if (!text.empty()) text += ' ';
        text += words[rng.next_below(4)];
      }
      set.push_back(text);
    }
    double mean = 0.0;
    for (const auto& s : set) mean += rouge(s, "a b c d");
    mean /= static_cast<double>(set.size());
    CHECK(metrics::oracle_top_k(set, "a b c d", rouge) >= mean - 1e-12);
  }
}

TEST_CASE("spearman hand value and rank-only invariance") {
  CHECK(metrics::spearman({1, 2, 3, 4}, {1, 3, 2, 4}) == Catch::Approx(0.8).margin(1e-9));
  CHECK(metrics::spearman({1, 2, 3}, {10, 20, 30}) == Catch::Approx(1.0));
  CHECK(metrics::spearman({1, 2, 3}, {3, 2, 1}) == Catch::Approx(-1.0));

  // Any strictly increasing transform of one side leaves ranks unchanged.
  std::vector<double> xs = {0.3, 1.7, 0.9, 2.4, 1.1};
  std::vector<double> ys = {5.0, 2.0, 9.0, 1.0, 4.0};
  std::vector<double> ys_exp;
  for (double y : ys) ys_exp.push_back(std::exp(y));
  CHECK(metrics::spearman(xs, ys) == Catch::Approx(metrics::spearman(xs, ys_exp)));

  // Ties get mean ranks.
  CHECK(metrics::spearman({1, 1, 2}, {1, 2, 3}) == Catch::Approx(std::sqrt(3.0) / 2.0));

  CHECK_THROWS_AS(metrics::spearman({1, 2}, {1, 2}), ParameterError);
  CHECK_THROWS_AS(metrics::spearman({1, 2, 3}, {1, 2}), ParameterError);
  CHECK_THROWS_AS(metrics::spearman({5, 5, 5}, {1, 2, 3}), UndefinedMetricError);
}

TEST_CASE("sample set report fills reference and self metrics when available") {
  metrics::SampleSetInputs in;
  in.doc_id = "d1";
  in.strategy = "nucleus";
  in.source = "Liverpool beat Chelsea at Anfield on Sunday";
  in.reference = "Liverpool beat Chelsea";
  in.summaries = {"Liverpool beat Chelsea", "Chelsea lost at Anfield", "Liverpool beat Chelsea"};
  in.sample_mean_nlls = {0.5, 0.7, 0.6};

  metrics::LexicalEntailmentScorer ent;
  metrics::UnigramSimilarityScorer sim;
  metrics::SampleSetReport r = metrics::compute_sample_set_report(in, ent, sim);

  CHECK(r.doc_id == "d1");
  CHECK(r.num_samples == 3);
  CHECK(r.mean_nll == Catch::Approx(0.6));
  CHECK(r.true_ppl == Catch::Approx(std::exp(0.6)));
  CHECK(r.unique_samples == 2);
  REQUIRE(r.rouge_l.has_value());
  REQUIRE(r.bleu_4.has_value());
  REQUIRE(r.oracle_bleu_4.has_value());
  CHECK(*r.oracle_bleu_4 >= *r.bleu_4 - 1e-12);
  REQUIRE(r.self_bleu.has_value());
  REQUIRE(r.self_entailment.has_value());
  REQUIRE(r.edna_score.has_value());
  CHECK(*r.edna_score == Catch::Approx(metrics::edna(r.entailment, *r.self_entailment)));
  CHECK_NOTHROW(metrics::validate_report(r));

  // Identical samples give maximal self-similarity.
  metrics::SampleSetInputs dup = in;
  dup.summaries = {"same", "same", "same"};
  dup.sample_mean_nlls = {0.1, 0.1, 0.1};
  metrics::SampleSetReport rd = metrics::compute_sample_set_report(dup, ent, sim);
  CHECK(*rd.self_bleu == 100.0);
  CHECK(rd.unique_samples == 1);
}

TEST_CASE("sample set report degrades without reference or second sample") {
  metrics::LexicalEntailmentScorer ent;
  metrics::UnigramSimilarityScorer sim;

  metrics::SampleSetInputs single;
  single.doc_id = "d1";
  single.strategy = "beam";
  single.source = "some source text";
  single.summaries = {"some source"};
  single.sample_mean_nlls = {0.4};
  single.deterministic = true;
  metrics::SampleSetReport r = metrics::compute_sample_set_report(single, ent, sim);
  CHECK(r.deterministic);
  CHECK_FALSE(r.rouge_l.has_value());
  CHECK_FALSE(r.self_bleu.has_value());
  CHECK_FALSE(r.edna_score.has_value());
  CHECK(r.unique_samples == 1);
  CHECK_NOTHROW(metrics::validate_report(r));

  metrics::SampleSetInputs bad;
  bad.summaries = {};
  CHECK_THROWS_AS(metrics::compute_sample_set_report(bad, ent, sim), ParameterError);
  bad.summaries = {"a"};
  bad.sample_mean_nlls = {0.1, 0.2};
  CHECK_THROWS_AS(metrics::compute_sample_set_report(bad, ent, sim), ParameterError);
}

TEST_CASE("aggregation averages rows and refuses mixed strategies") {
  metrics::SampleSetReport a;
  a.doc_id = "d1";
  a.strategy = "nucleus";
  a.num_samples = 5;
  a.mean_nll = 1.0;
  a.entailment = 0.8;
  a.unique_samples = 5;
  a.rouge_l = 0.5;
  a.malformed_retries = 1;

  metrics::SampleSetReport b = a;
  b.doc_id = "d2";
  b.mean_nll = 2.0;
  b.entailment = 0.6;
  b.unique_samples = 3;
  b.rouge_l = std::nullopt;
  b.scorer_fallback = true;
  b.malformed_retries = 2;

  metrics::AggregateRow row = metrics::aggregate_report({a, b});
  CHECK(row.num_docs == 2);
  CHECK(row.mean_nll == Catch::Approx(1.5));
  CHECK(row.true_ppl == Catch::Approx(std::exp(1.5)));
  CHECK(row.entailment == Catch::Approx(0.7));
  CHECK(row.unique_samples == Catch::Approx(4.0));
  // Present-only averaging: rouge comes from the single row carrying it.
  REQUIRE(row.rouge_l.has_value());
  CHECK(*row.rouge_l == Catch::Approx(0.5));
  CHECK_FALSE(row.self_bleu.has_value());
  CHECK(row.malformed_retries == 3);
  CHECK(row.scorer_fallback);

  metrics::SampleSetReport other = a;
  other.strategy = "beam";
  CHECK_THROWS_AS(metrics::aggregate_report({a, other}), ParameterError);
  CHECK_THROWS_AS(metrics::aggregate_report({}), ParameterError);
}

TEST_CASE("report validation rejects out-of-bounds and inconsistent fields") {
  metrics::SampleSetReport r;
  r.doc_id = "d1";
  r.strategy = "nucleus";
  r.num_samples = 3;
  r.unique_samples = 2;
  r.mean_nll = 1.0;
  r.true_ppl = std::exp(1.0);
  r.entailment = 0.7;
  r.self_entailment = 0.1;
  r.edna_score = metrics::edna(0.7, 0.1);
  CHECK_NOTHROW(metrics::validate_report(r));

  metrics::SampleSetReport bad = r;
  bad.edna_score = 0.5;  // inconsistent with the stored inputs
  CHECK_THROWS_AS(metrics::validate_report(bad), UndefinedMetricError);

  bad = r;
  bad.unique_samples = 4;
  CHECK_THROWS_AS(metrics::validate_report(bad), UndefinedMetricError);

  bad = r;
  bad.rouge_l = 1.5;
  CHECK_THROWS_AS(metrics::validate_report(bad), UndefinedMetricError);

  bad = r;
  bad.self_bleu = 120.0;
  CHECK_THROWS_AS(metrics::validate_report(bad), UndefinedMetricError);

  bad = r;
  bad.mean_nll = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(metrics::validate_report(bad), UndefinedMetricError);
}
