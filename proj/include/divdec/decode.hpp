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
 * Decoding strategies over ConditionalModel.
 *
 * beam_search keeps the beam_size best partial hypotheses by cumulative log
 * probability, banks every hypothesis that reaches EOS, and ranks finished
 * hypotheses by logprob / lp(n) with the GNMT penalty
 * lp(n) = ((5 + n) / 6)^alpha. Ties resolve toward the lexicographically
 * smaller token sequence, so results are deterministic.
 *
 * composition_sample decodes in two phases: an ancestral nucleus sample of
 * the entity-chain region (from the forced "[CONTENT]" mark up to the
 * sampled "[SUMMARY]" mark), then a beam search for the output text with
 * the serialized chain as forced prefix. The constrained variant filters
 * the sampled chain against the source document between the phases.
 *
 * restricted_beam_search runs the search on the masked-and-renormalized
 * distribution; recorded NLLs always come from the untransformed model so
 * they stay comparable across strategies.
 */

#ifndef DIVDEC_DECODE_HPP_
#define DIVDEC_DECODE_HPP_

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "divdec/core.hpp"
#include "divdec/rng.hpp"
#include "divdec/transforms.hpp"

namespace divdec::decode {

inline double length_penalty(size_t n, double alpha) {
  return std::pow((5.0 + static_cast<double>(n)) / 6.0, alpha);
}

// Inverse-CDF draw over token ids in id order. The distribution is assumed
// normalized; a tiny mass deficit from rounding falls to the last positive
// entry.
inline TokenId sample_categorical(Rng& rng, const TokenDistribution& d) {
  double target = rng.next_double() * d.mass();
  double cumulative = 0.0;
  TokenId last_positive = -1;
  for (size_t i = 0; i < d.size(); ++i) {
    double p = d.probs[i];
    if (p <= 0.0) continue;
    cumulative += p;
    last_positive = static_cast<TokenId>(i);
    if (cumulative > target) return last_positive;
  }
  if (last_positive < 0) throw Error("cannot sample from a zero-mass distribution");
  return last_positive;
}

struct ScoredSequence {
  double nll = 0.0;
  std::vector<double> token_nlls;

  double mean_nll() const {
    return token_nlls.empty() ? 0.0 : nll / static_cast<double>(token_nlls.size());
  }

  bool has_impossible_token() const {
    for (double v : token_nlls) {
      if (std::isinf(v)) return true;
    }
    return false;
  }
};

// Teacher-forced NLL of a token sequence under the untransformed model.
// Zero-probability tokens record an infinite NLL instead of throwing.
inline ScoredSequence score_sequence(const ConditionalModel& model, const Document& input,
                                     std::span<const TokenId> tokens) {
  ScoredSequence out;
  std::vector<TokenId> prefix;
  prefix.reserve(tokens.size());
  for (TokenId id : tokens) {
    TokenDistribution d = model.next_distribution(input, prefix);
    double p = (id >= 0 && static_cast<size_t>(id) < d.size())
                   ? d.probs[static_cast<size_t>(id)]
                   : 0.0;
    double nll = p > 0.0 ? -std::log(p) : std::numeric_limits<double>::infinity();
    out.token_nlls.push_back(nll);
    out.nll += nll;
    prefix.push_back(id);
  }
  return out;
}

// Mean over the sequence's decode steps of the probability mass held by the
// m most probable tokens of each step distribution.
inline double top_m_cumulative_mass(const ConditionalModel& model, const Document& input,
                                    std::span<const TokenId> tokens, int m) {
  if (m < 1) throw ParameterError("top_m_cumulative_mass needs m >= 1");
  if (tokens.empty()) throw ParameterError("top_m_cumulative_mass needs a non-empty sequence");
  std::vector<TokenId> prefix;
  prefix.reserve(tokens.size());
  double total = 0.0;
  for (TokenId id : tokens) {
    TokenDistribution d = model.next_distribution(input, prefix);
    std::vector<double> probs = d.probs;
    size_t keep = std::min(static_cast<size_t>(m), probs.size());
    std::partial_sort(probs.begin(), probs.begin() + static_cast<std::ptrdiff_t>(keep),
                      probs.end(), std::greater<double>());
    for (size_t i = 0; i < keep; ++i) total += probs[i];
    prefix.push_back(id);
  }
  return total / static_cast<double>(tokens.size());
}

// Draws one sequence token by token, applying the transform at each step.
// Recorded NLLs come from the untransformed distribution.
inline Hypothesis ancestral_sample(const ConditionalModel& model, const Document& input,
                                   const DistributionTransform& transform, int max_len,
                                   SamplerState& state) {
  if (max_len < 1) throw ParameterError("max_len must be >= 1");
  Hypothesis hyp;
  for (int step = 0; step < max_len; ++step) {
    TokenDistribution raw = model.next_distribution(input, hyp.tokens);
    TokenDistribution sampling = transform.apply(raw);
    TokenId id = sample_categorical(state.rng, sampling);
    double p = raw.probs[static_cast<size_t>(id)];
    double nll = p > 0.0 ? -std::log(p) : std::numeric_limits<double>::infinity();
    hyp.tokens.push_back(id);
    hyp.token_nlls.push_back(nll);
    hyp.nll += nll;
    if (id == Vocabulary::kEos) break;
  }
  hyp.truncated = hyp.tokens.empty() || hyp.tokens.back() != Vocabulary::kEos;
  hyp.text = detokenize(hyp.tokens, model.vocabulary());
  return hyp;
}

namespace detail {

struct BeamEntry {
  std::vector<TokenId> tokens;
  std::vector<double> nlls;  // raw-model per-token NLL
  double raw_nll = 0.0;
  double search_nll = 0.0;  // equals raw_nll unless a mask renormalized the step
};

inline Hypothesis to_hypothesis(BeamEntry entry, const Vocabulary& vocab, bool truncated) {
  Hypothesis hyp;
  hyp.tokens = std::move(entry.tokens);
  hyp.token_nlls = std::move(entry.nlls);
  hyp.nll = entry.raw_nll;
  hyp.truncated = truncated;
  hyp.text = detokenize(hyp.tokens, vocab);
  return hyp;
}

// Shared beam loop. `allowed`, when present, masks the search distribution
// per step (renormalized); `forced` tokens are consumed before free search
// and bypass the mask.
inline std::vector<Hypothesis> beam_core(const ConditionalModel& model, const Document& input,
                                         int beam_size, double alpha, int max_len,
                                         std::span<const TokenId> forced,
                                         const std::vector<char>* allowed) {
  if (beam_size < 1) throw ParameterError("beam_size must be >= 1");
  if (max_len < 1) throw ParameterError("max_len must be >= 1");

  const size_t vocab_size = model.vocabulary().size();
  constexpr double kInf = std::numeric_limits<double>::infinity();

  BeamEntry root;
  // A leading BOS in the forced prefix is the caller's sequence-start
  // convention; prefixes passed to the model never carry it.
  size_t begin = (!forced.empty() && forced.front() == Vocabulary::kBos) ? 1 : 0;
  for (size_t i = begin; i < forced.size(); ++i) {
    TokenId id = forced[i];
    if (id < 0 || static_cast<size_t>(id) >= vocab_size) {
      throw ParameterError("forced prefix contains an invalid token id");
    }
    if (static_cast<int>(root.tokens.size()) >= max_len) {
      throw ParameterError("forced prefix longer than max_len");
    }
    TokenDistribution d = model.next_distribution(input, root.tokens);
    double p = d.probs[static_cast<size_t>(id)];
    double nll = p > 0.0 ? -std::log(p) : kInf;
    root.tokens.push_back(id);
    root.nlls.push_back(nll);
    root.raw_nll += nll;
    root.search_nll += nll;
  }

  bool forced_finished = !root.tokens.empty() && root.tokens.back() == Vocabulary::kEos;

  std::vector<BeamEntry> alive;
  std::vector<BeamEntry> finished;
  if (forced_finished) {
    finished.push_back(std::move(root));
  } else {
    alive.push_back(std::move(root));
  }

  auto better_entry = [](const BeamEntry& a, const BeamEntry& b) {
    if (a.search_nll != b.search_nll) return a.search_nll < b.search_nll;
    return a.tokens < b.tokens;
  };

  while (!alive.empty() && static_cast<int>(alive.front().tokens.size()) < max_len) {
    std::vector<BeamEntry> candidates;
    candidates.reserve(alive.size() * 4);
    for (const BeamEntry& entry : alive) {
      TokenDistribution d = model.next_distribution(input, entry.tokens);
      double masked_mass = 0.0;
      if (allowed) {
        for (size_t id = 0; id < d.size(); ++id) {
          if ((*allowed)[id]) masked_mass += d.probs[id];
        }
        if (masked_mass <= 0.0) continue;  // every continuation masked away
      }
      for (size_t id = 0; id < d.size(); ++id) {
        double p = d.probs[id];
        if (p <= 0.0 || (allowed && !(*allowed)[id])) continue;
        BeamEntry next = entry;
        next.tokens.push_back(static_cast<TokenId>(id));
        double nll = -std::log(p);
        next.nlls.push_back(nll);
        next.raw_nll += nll;
        next.search_nll += allowed ? -std::log(p / masked_mass) : nll;
        candidates.push_back(std::move(next));
      }
    }

    std::sort(candidates.begin(), candidates.end(), better_entry);

    alive.clear();
    for (BeamEntry& entry : candidates) {
      if (entry.tokens.back() == Vocabulary::kEos) {
        finished.push_back(std::move(entry));
      } else if (static_cast<int>(alive.size()) < beam_size) {
        alive.push_back(std::move(entry));
      }
    }
  }

  auto better_scored = [alpha](const BeamEntry& a, const BeamEntry& b) {
    double sa = -a.search_nll / length_penalty(a.tokens.size(), alpha);
    double sb = -b.search_nll / length_penalty(b.tokens.size(), alpha);
    if (sa != sb) return sa > sb;
    return a.tokens < b.tokens;
  };

  const Vocabulary& vocab = model.vocabulary();
  std::vector<Hypothesis> results;
  if (!finished.empty()) {
    std::sort(finished.begin(), finished.end(), better_scored);
    size_t take = std::min<size_t>(finished.size(), static_cast<size_t>(beam_size));
    for (size_t i = 0; i < take; ++i) {
      results.push_back(to_hypothesis(std::move(finished[i]), vocab, false));
    }
    return results;
  }
  if (alive.empty()) {
    throw EmptyBeamError("beam emptied before any hypothesis finished for document '" +
                         input.id + "'");
  }
  std::sort(alive.begin(), alive.end(), better_scored);
  size_t take = std::min<size_t>(alive.size(), static_cast<size_t>(beam_size));
  for (size_t i = 0; i < take; ++i) {
    results.push_back(to_hypothesis(std::move(alive[i]), vocab, true));
  }
  return results;
}

}  // namespace detail

// Returns up to beam_size hypotheses, best first. If nothing reaches EOS
// within max_len, the best unfinished beams come back flagged truncated.
inline std::vector<Hypothesis> beam_search(const ConditionalModel& model, const Document& input,
                                           int beam_size, double alpha, int max_len,
                                           std::span<const TokenId> forced_prefix = {}) {
  return detail::beam_core(model, input, beam_size, alpha, max_len, forced_prefix, nullptr);
}

// Weighted sample of k token ids without replacement, proportional to the
// relevance scores; EOS and the plan-structure tokens are always included.
// k at or above the scored support returns the whole support. The result is
// sorted ascending.
inline std::vector<TokenId> sample_vocab_subset(const std::vector<double>& relevance, int k,
                                                SamplerState& state) {
  if (k < 1) throw ParameterError("subset size k must be >= 1");
  for (double w : relevance) {
    if (w < 0.0 || !std::isfinite(w)) {
      throw ParameterError("relevance scores must be finite and non-negative");
    }
  }

  std::vector<char> chosen(relevance.size(), 0);
  for (TokenId id : {Vocabulary::kEos, Vocabulary::kContentMark, Vocabulary::kSummaryMark,
                     Vocabulary::kEntitySep, Vocabulary::kSentenceSep}) {
    if (static_cast<size_t>(id) < chosen.size()) chosen[static_cast<size_t>(id)] = 1;
  }

  size_t support = 0;
  for (double w : relevance) {
    if (w > 0.0) ++support;
  }

  if (static_cast<size_t>(k) >= support) {
    for (size_t i = 0; i < relevance.size(); ++i) {
      if (relevance[i] > 0.0) chosen[i] = 1;
    }
  } else {
    std::vector<double> weights = relevance;
    for (int draw = 0; draw < k; ++draw) {
      double total = 0.0;
      for (double w : weights) total += w;
      if (total <= 0.0) break;
      double target = state.rng.next_double() * total;
      double cumulative = 0.0;
      size_t picked = weights.size();
      for (size_t i = 0; i < weights.size(); ++i) {
        if (weights[i] <= 0.0) continue;
        cumulative += weights[i];
        picked = i;
        if (cumulative > target) break;
      }
      if (picked == weights.size()) break;
      chosen[picked] = 1;
      weights[picked] = 0.0;
    }
  }

  std::vector<TokenId> subset;
  for (size_t i = 0; i < chosen.size(); ++i) {
    if (chosen[i]) subset.push_back(static_cast<TokenId>(i));
  }
  return subset;
}

// Beam search over the subset-restricted, per-step renormalized
// distribution. Hypothesis NLLs are still measured under the raw model.
// Throws EmptyBeamError if masking starves the whole beam.
inline std::vector<Hypothesis> restricted_beam_search(const ConditionalModel& model,
                                                      const Document& input,
                                                      const std::vector<TokenId>& allowed_ids,
                                                      int beam_size, double alpha, int max_len) {
  std::vector<char> allowed(model.vocabulary().size(), 0);
  for (TokenId id : allowed_ids) {
    if (id < 0 || static_cast<size_t>(id) >= allowed.size()) {
      throw ParameterError("allowed set contains an invalid token id");
    }
    allowed[static_cast<size_t>(id)] = 1;
  }
  return detail::beam_core(model, input, beam_size, alpha, max_len, {}, &allowed);
}

// Two-phase composition sampling; see the file comment. Throws
// MalformedPlanError when the plan region hits EOS or runs past max_len.
inline Hypothesis composition_sample(const ConditionalModel& model, const Document& input,
                                     const DecodeParams& params, SamplerState& state,
                                     bool constrained) {
  params.validate();
  const Vocabulary& vocab = model.vocabulary();

  // Phase 1: nucleus-sample the chain region.
  std::vector<TokenId> prefix = {Vocabulary::kContentMark};
  std::vector<TokenId> chain_tokens;
  DistributionTransform nucleus = DistributionTransform::with_nucleus(params.nucleus_p);
  while (true) {
    if (static_cast<int>(prefix.size()) >= params.max_len) {
      throw MalformedPlanError("plan region for document '" + input.id +
                               "' ran past max_len without [SUMMARY]");
    }
    TokenDistribution raw = model.next_distribution(input, prefix);
    TokenId id = sample_categorical(state.rng, nucleus.apply(raw));
    if (id == Vocabulary::kEos) {
      throw MalformedPlanError("sampled EOS inside the plan region for document '" +
                               input.id + "'");
    }
    prefix.push_back(id);
    if (id == Vocabulary::kSummaryMark) break;
    chain_tokens.push_back(id);
  }

  plan::Composition composition = plan::parse_chain(detokenize(chain_tokens, vocab));
  if (constrained) {
    composition = plan::constrain_composition(composition, input.source);
  }

  // Phase 2: beam-search the output with the (possibly constrained) chain
  // as forced prefix.
  std::vector<TokenId> forced = {Vocabulary::kContentMark};
  for (TokenId id : tokenize(plan::serialize_composition(composition), vocab)) {
    forced.push_back(id);
  }
  forced.push_back(Vocabulary::kSummaryMark);

  std::vector<Hypothesis> results =
      beam_search(model, input, params.beam_size, params.length_penalty_alpha,
                  params.max_len, forced);
  Hypothesis hyp = std::move(results.front());
  hyp.composition = std::move(composition);

  size_t summary_pos = 0;
  while (summary_pos < hyp.tokens.size() && hyp.tokens[summary_pos] != Vocabulary::kSummaryMark) {
    ++summary_pos;
  }
  double plan_nll = 0.0;
  for (size_t i = 0; i <= summary_pos && i < hyp.token_nlls.size(); ++i) {
    plan_nll += hyp.token_nlls[i];
  }
  hyp.plan_nll = plan_nll;
  hyp.output_nll = hyp.nll - plan_nll;
  return hyp;
}

// composition_sample with one retry on a malformed plan, drawn from a
// derived substream. `retried`, when given, reports whether the retry was
// taken. A second malformed plan propagates.
inline Hypothesis composition_sample_retrying(const ConditionalModel& model,
                                              const Document& input, const DecodeParams& params,
                                              SamplerState& state, bool constrained,
                                              bool* retried = nullptr) {
  if (retried) *retried = false;
  try {
    return composition_sample(model, input, params, state, constrained);
  } catch (const MalformedPlanError&) {
    if (retried) *retried = true;
    SamplerState retry = state.derived(1);
    return composition_sample(model, input, params, retry, constrained);
  }
}

}  // namespace divdec::decode

#endif  // DIVDEC_DECODE_HPP_
