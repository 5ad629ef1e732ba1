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

#include "divdec/core.hpp"
#include "divdec/rng.hpp"

using namespace divdec;

TEST_CASE("reserved token ids are stable") {
  Vocabulary v;
  CHECK(Vocabulary::kPad == 0);
  CHECK(Vocabulary::kBos == 1);
  CHECK(Vocabulary::kEos == 2);
  CHECK(Vocabulary::kUnk == 3);
  CHECK(Vocabulary::kContentMark == 4);
  CHECK(Vocabulary::kSummaryMark == 5);
  CHECK(Vocabulary::kEntitySep == 6);
  CHECK(Vocabulary::kSentenceSep == 7);
  CHECK(v.size() == 8);
  CHECK(v.token(Vocabulary::kContentMark) == "[CONTENT]");
  CHECK(v.token(Vocabulary::kSummaryMark) == "[SUMMARY]");
  CHECK(v.token(Vocabulary::kEntitySep) == "|");
  CHECK(v.token(Vocabulary::kSentenceSep) == "|||");
  CHECK(v.id_of("</s>") == Vocabulary::kEos);
  CHECK(Vocabulary::is_reserved(7));
  CHECK_FALSE(Vocabulary::is_reserved(8));
}

TEST_CASE("vocabulary add deduplicates and id_of misses cleanly") {
  Vocabulary v({"alpha", "beta", "alpha"});
  CHECK(v.size() == 10);
  CHECK(v.add("alpha") == *v.id_of("alpha"));
  CHECK_FALSE(v.id_of("gamma").has_value());
  CHECK_THROWS_AS(v.token(-1), Error);
  CHECK_THROWS_AS(v.token(static_cast<TokenId>(v.size())), Error);
}

TEST_CASE("tokenize maps words, markers, and unknowns") {
  Vocabulary v({"Chelsea", "beat", "Arsenal"});
  CHECK(tokenize("", v).empty());
  CHECK(tokenize("   \t  ", v).empty());
  std::vector<TokenId> ids = tokenize("Chelsea beat Arsenal", v);
  REQUIRE(ids.size() == 3);
  CHECK(ids[0] == *v.id_of("Chelsea"));
  CHECK(ids[1] == *v.id_of("beat"));
  CHECK(ids[2] == *v.id_of("Arsenal"));
  CHECK(tokenize("Chelsea drew Spurs", v)[1] == Vocabulary::kUnk);
  std::vector<TokenId> plan = tokenize("[CONTENT] Chelsea | Arsenal [SUMMARY]", v);
  REQUIRE(plan.size() == 5);
  CHECK(plan[0] == Vocabulary::kContentMark);
  CHECK(plan[2] == Vocabulary::kEntitySep);
  CHECK(plan[4] == Vocabulary::kSummaryMark);
}

TEST_CASE("detokenize strips structural padding and keeps plan markers") {
  Vocabulary v({"Chelsea", "won"});
  std::vector<TokenId> ids = {Vocabulary::kBos, *v.id_of("Chelsea"), *v.id_of("won"),
                              Vocabulary::kEos};
  CHECK(detokenize(ids, v) == "Chelsea won");
  std::vector<TokenId> plan = {Vocabulary::kContentMark, *v.id_of("Chelsea"),
                               Vocabulary::kSummaryMark, *v.id_of("won"), Vocabulary::kEos};
  CHECK(detokenize(plan, v) == "[CONTENT] Chelsea [SUMMARY] won");
  CHECK(detokenize(std::vector<TokenId>{}, v).empty());
  std::vector<TokenId> bad = {42};
  CHECK_THROWS_AS(detokenize(bad, v), Error);
}

TEST_CASE("tokenize/detokenize round-trip on whitespace-normalized text") {
  Vocabulary v({"red", "fox", "jumps", "2012", "[x]", "a"});
  std::vector<std::string> pool = {"red",  "fox", "jumps", "2012",
                                   "[x]",  "a",   "[CONTENT]", "[SUMMARY]",
                                   "|",    "|||"};
  Rng rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    std::string text;
    size_t len = rng.next_below(12);
    for (size_t i = 0; i < len; ++i) {
      if (!text.empty()) text += ' ';
      text += pool[rng.next_below(pool.size())];
    }
    CHECK(detokenize(tokenize(text, v), v) == text);
  }
}

TEST_CASE("distribution validity and normalization") {
  TokenDistribution d{{0.25, 0.25, 0.5}};
  CHECK(is_valid_distribution(d));
  CHECK_FALSE(is_valid_distribution(TokenDistribution{{0.5, 0.6}}));
  CHECK_FALSE(is_valid_distribution(TokenDistribution{{-0.1, 1.1}}));
  TokenDistribution z{{2.0, 2.0}};
  z.normalize();
  CHECK(z.probs[0] == 0.5);
  TokenDistribution zero{{0.0, 0.0}};
  CHECK_THROWS_AS(zero.normalize(), Error);
}

TEST_CASE("decode params validation") {
  DecodeParams p;
  CHECK_NOTHROW(p.validate());

  DecodeParams bad = p;
  bad.beam_size = 0;
  CHECK_THROWS_AS(bad.validate(), ParameterError);
  bad = p;
  bad.length_penalty_alpha = -0.5;
  CHECK_THROWS_AS(bad.validate(), ParameterError);
  bad = p;
  bad.temperature = 0.0;
  CHECK_THROWS_AS(bad.validate(), ParameterError);
  bad = p;
  bad.top_k = 0;
  CHECK_THROWS_AS(bad.validate(), ParameterError);
  bad = p;
  bad.nucleus_p = 0.0;
  CHECK_THROWS_AS(bad.validate(), ParameterError);
  bad = p;
  bad.nucleus_p = 1.5;
  CHECK_THROWS_AS(bad.validate(), ParameterError);
  bad = p;
  bad.num_samples = 0;
  CHECK_THROWS_AS(bad.validate(), ParameterError);
  bad = p;
  bad.max_len = 0;
  CHECK_THROWS_AS(bad.validate(), ParameterError);
}

TEST_CASE("strategy names round-trip") {
  for (Strategy s : {Strategy::kBeam, Strategy::kTemperature, Strategy::kTopK,
                     Strategy::kNucleus, Strategy::kFocus, Strategy::kComposition,
                     Strategy::kCompositionConstrained}) {
    CHECK(parse_strategy(to_string(s)) == s);
  }
  CHECK_THROWS_AS(parse_strategy("astral"), ParameterError);
  CHECK(is_deterministic(Strategy::kBeam));
  CHECK_FALSE(is_deterministic(Strategy::kNucleus));
}

namespace {

class BrokenModel : public ConditionalModel {
 public:
  TokenDistribution next_distribution(const Document&,
                                      std::span<const TokenId>) const override {
    return TokenDistribution{{0.7, 0.7}};
  }
  const Vocabulary& vocabulary() const override { return vocab_; }

 private:
  Vocabulary vocab_;
};

}  // namespace

TEST_CASE("validating model rejects invalid distributions") {
  BrokenModel broken;
  ValidatingModel checked(broken);
  Document doc{"d1", "src", {}, {}, {}};
  CHECK_THROWS_AS(checked.next_distribution(doc, {}), Error);
}

TEST_CASE("hypothesis helpers") {
  Hypothesis h;
  h.tokens = {8, 9, Vocabulary::kEos};
  h.token_nlls = {1.0, 2.0, 3.0};
  h.nll = 6.0;
  CHECK(h.mean_nll() == Catch::Approx(2.0));
  CHECK_FALSE(h.has_impossible_token());
  h.token_nlls[1] = std::numeric_limits<double>::infinity();
  CHECK(h.has_impossible_token());
  CHECK(Hypothesis{}.mean_nll() == 0.0);
}

TEST_CASE("sampler substreams are deterministic and doc-dependent") {
  SamplerState a = SamplerState::for_sample(1, "doc-1", 0);
  SamplerState b = SamplerState::for_sample(1, "doc-1", 0);
  SamplerState c = SamplerState::for_sample(1, "doc-2", 0);
  SamplerState d = SamplerState::for_sample(1, "doc-1", 1);
  SamplerState e = SamplerState::for_sample(2, "doc-1", 0);
  std::uint64_t ra = a.rng.next_u64();
  CHECK(ra == b.rng.next_u64());
  CHECK(ra != c.rng.next_u64());
  CHECK(ra != d.rng.next_u64());
  CHECK(ra != e.rng.next_u64());
  for (int i = 0; i < 1000; ++i) {
    double u = a.rng.next_double();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
}
