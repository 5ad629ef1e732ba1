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
 * Core value types: vocabulary with reserved control tokens, documents,
 * per-step token distributions, decoded hypotheses, and the conditional
 * model interface every decoder consumes.
 *
 * Conventions used throughout:
 *  - Model prefixes never contain BOS; decoding starts from the empty
 *    prefix. Hypothesis token sequences likewise exclude BOS and include
 *    the terminating EOS when one was produced.
 *  - NLLs are natural-log, accumulated in token order.
 */

#ifndef DIVDEC_CORE_HPP_
#define DIVDEC_CORE_HPP_

#include <cctype>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "divdec/error.hpp"
#include "divdec/plan.hpp"

namespace divdec {

using TokenId = std::int32_t;

class Vocabulary {
 public:
  static constexpr TokenId kPad = 0;
  static constexpr TokenId kBos = 1;
  static constexpr TokenId kEos = 2;
  static constexpr TokenId kUnk = 3;
  static constexpr TokenId kContentMark = 4;
  static constexpr TokenId kSummaryMark = 5;
  static constexpr TokenId kEntitySep = 6;
  static constexpr TokenId kSentenceSep = 7;
  static constexpr TokenId kNumReserved = 8;

  Vocabulary() {
    for (const char* w : {"<pad>", "<s>", "</s>", "<unk>", "[CONTENT]",
                          "[SUMMARY]", "|", "|||"}) {
      add(w);
    }
  }

  explicit Vocabulary(const std::vector<std::string>& words) : Vocabulary() {
    for (const auto& w : words) add(w);
  }

  // Registers a surface form if new; returns its id either way.
  TokenId add(std::string_view word) {
    auto it = ids_.find(std::string(word));
    if (it != ids_.end()) return it->second;
    TokenId id = static_cast<TokenId>(tokens_.size());
    tokens_.emplace_back(word);
    ids_.emplace(tokens_.back(), id);
    return id;
  }

  size_t size() const { return tokens_.size(); }

  const std::string& token(TokenId id) const {
    if (id < 0 || static_cast<size_t>(id) >= tokens_.size()) {
      throw Error("token id " + std::to_string(id) + " outside vocabulary of size " +
                  std::to_string(tokens_.size()));
    }
    return tokens_[static_cast<size_t>(id)];
  }

  std::optional<TokenId> id_of(std::string_view word) const {
    auto it = ids_.find(std::string(word));
    if (it == ids_.end()) return std::nullopt;
    return it->second;
  }

  static bool is_reserved(TokenId id) { return id >= 0 && id < kNumReserved; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> ids_;
};

// Whitespace tokenizer: unknown surface forms map to <unk>.
inline std::vector<TokenId> tokenize(std::string_view text, const Vocabulary& vocab) {
  std::vector<TokenId> ids;
  size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    size_t start = i;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i > start) {
      auto id = vocab.id_of(text.substr(start, i - start));
      ids.push_back(id ? *id : Vocabulary::kUnk);
    }
  }
  return ids;
}

// Joins surface forms with single spaces. Structural padding (<pad>, <s>,
// </s>) is dropped; the plan markers and separators are kept so planned
// targets survive a decode/parse round trip. Invalid ids throw.
inline std::string detokenize(std::span<const TokenId> ids, const Vocabulary& vocab) {
  std::string out;
  for (TokenId id : ids) {
    if (id == Vocabulary::kPad || id == Vocabulary::kBos || id == Vocabulary::kEos) {
      vocab.token(id);  // still bounds-check
      continue;
    }
    if (!out.empty()) out += ' ';
    out += vocab.token(id);
  }
  return out;
}

struct TokenDistribution {
  // probs[id] is the probability of token id; dense over the vocabulary.
  std::vector<double> probs;

  size_t size() const { return probs.size(); }

  double mass() const {
    double m = 0.0;
    for (double p : probs) m += p;
    return m;
  }

  TokenDistribution& normalize() {
    double m = mass();
    if (m <= 0.0) throw Error("cannot normalize a zero-mass distribution");
    for (double& p : probs) p /= m;
    return *this;
  }
};

inline bool is_valid_distribution(const TokenDistribution& d, double eps = 1e-9) {
  double m = 0.0;
  for (double p : d.probs) {
    if (p < 0.0 || !std::isfinite(p)) return false;
    m += p;
  }
  return std::fabs(m - 1.0) <= eps;
}

struct Document {
  std::string id;
  std::string source;
  std::optional<std::string> reference;
  std::optional<plan::Composition> reference_chain;
  std::optional<std::string> answer_span;
};

struct Hypothesis {
  std::vector<TokenId> tokens;  // excludes BOS; includes EOS when reached
  std::string text;
  std::optional<plan::Composition> composition;
  double nll = 0.0;
  std::vector<double> token_nlls;
  bool truncated = false;
  // Composition decodes also split the NLL at the [SUMMARY] marker.
  std::optional<double> plan_nll;
  std::optional<double> output_nll;

  double mean_nll() const {
    return tokens.empty() ? 0.0 : nll / static_cast<double>(tokens.size());
  }

  bool has_impossible_token() const {
    for (double v : token_nlls) {
      if (std::isinf(v)) return true;
    }
    return false;
  }
};

class ConditionalModel {
 public:
  virtual ~ConditionalModel() = default;

  // Distribution over the next token given the input document and the
  // generated prefix so far (no BOS; empty span means sequence start).
  virtual TokenDistribution next_distribution(const Document& input,
                                              std::span<const TokenId> prefix) const = 0;

  virtual const Vocabulary& vocabulary() const = 0;
};

// Debug wrapper: re-checks that every emitted distribution is a distribution.
class ValidatingModel : public ConditionalModel {
 public:
  explicit ValidatingModel(const ConditionalModel& inner) : inner_(inner) {}

  TokenDistribution next_distribution(const Document& input,
                                      std::span<const TokenId> prefix) const override {
    TokenDistribution d = inner_.next_distribution(input, prefix);
    if (d.size() != inner_.vocabulary().size() || !is_valid_distribution(d)) {
      throw Error("model emitted an invalid distribution for document '" + input.id + "'");
    }
    return d;
  }

  const Vocabulary& vocabulary() const override { return inner_.vocabulary(); }

 private:
  const ConditionalModel& inner_;
};

enum class Strategy {
  kBeam,
  kTemperature,
  kTopK,
  kNucleus,
  kFocus,
  kComposition,
  kCompositionConstrained,
};

inline std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::kBeam: return "beam";
    case Strategy::kTemperature: return "temperature";
    case Strategy::kTopK: return "top_k";
    case Strategy::kNucleus: return "nucleus";
    case Strategy::kFocus: return "focus";
    case Strategy::kComposition: return "composition";
    case Strategy::kCompositionConstrained: return "composition_constrained";
  }
  throw ParameterError("unknown strategy enum value");
}

inline Strategy parse_strategy(std::string_view name) {
  if (name == "beam") return Strategy::kBeam;
  if (name == "temperature") return Strategy::kTemperature;
  if (name == "top_k") return Strategy::kTopK;
  if (name == "nucleus") return Strategy::kNucleus;
  if (name == "focus") return Strategy::kFocus;
  if (name == "composition") return Strategy::kComposition;
  if (name == "composition_constrained") return Strategy::kCompositionConstrained;
  throw ParameterError("unknown strategy name: " + std::string(name));
}

// True for strategies that ignore the sampler and always return one result.
inline bool is_deterministic(Strategy s) { return s == Strategy::kBeam; }

struct DecodeParams {
  Strategy strategy = Strategy::kBeam;
  int beam_size = 8;
  double length_penalty_alpha = 0.8;
  double temperature = 1.0;
  int top_k = 50;
  double nucleus_p = 0.95;
  int num_samples = 5;
  int max_len = 64;
  std::uint64_t seed = 0;

  void validate() const {
    if (beam_size < 1) throw ParameterError("beam_size must be >= 1");
    if (!(length_penalty_alpha >= 0.0) || !std::isfinite(length_penalty_alpha)) {
      throw ParameterError("length_penalty_alpha must be finite and >= 0");
    }
    if (!(temperature > 0.0) || !std::isfinite(temperature)) {
      throw ParameterError("temperature must be finite and > 0");
    }
    if (top_k < 1) throw ParameterError("top_k must be >= 1");
    if (!(nucleus_p > 0.0) || nucleus_p > 1.0) {
      throw ParameterError("nucleus_p must lie in (0, 1]");
    }
    if (num_samples < 1) throw ParameterError("num_samples must be >= 1");
    if (max_len < 1) throw ParameterError("max_len must be >= 1");
  }
};

}  // namespace divdec

#endif  // DIVDEC_CORE_HPP_
