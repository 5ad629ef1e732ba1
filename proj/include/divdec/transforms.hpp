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
 * Per-step distribution transforms used by the sampling decoders.
 *
 * All three return a full-width renormalized distribution and leave the
 * input untouched. Ties between equal probabilities resolve toward the
 * lower token id, so kept sets are deterministic.
 */

#ifndef DIVDEC_TRANSFORMS_HPP_
#define DIVDEC_TRANSFORMS_HPP_

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "divdec/core.hpp"

namespace divdec::decode {

namespace detail {

// Token ids ordered by probability descending, id ascending on ties.
inline std::vector<TokenId> ids_by_probability(const TokenDistribution& d) {
  std::vector<TokenId> ids(d.size());
  std::iota(ids.begin(), ids.end(), 0);
  std::sort(ids.begin(), ids.end(), [&](TokenId a, TokenId b) {
    double pa = d.probs[static_cast<size_t>(a)];
    double pb = d.probs[static_cast<size_t>(b)];
    if (pa != pb) return pa > pb;
    return a < b;
  });
  return ids;
}

}  // namespace detail

// p_i^(1/T), renormalized. T < 1 sharpens, T > 1 flattens, T = 1 is the
// identity. Zero entries stay zero.
inline TokenDistribution apply_temperature(const TokenDistribution& d, double temperature) {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw ParameterError("temperature must be finite and > 0");
  }
  TokenDistribution out;
  out.probs.resize(d.size(), 0.0);
  double total = 0.0;
  for (size_t i = 0; i < d.size(); ++i) {
    double p = d.probs[i];
    if (p > 0.0) {
      out.probs[i] = std::pow(p, 1.0 / temperature);
      total += out.probs[i];
    }
  }
  if (total <= 0.0) throw Error("temperature transform saw a zero-mass distribution");
  for (double& p : out.probs) p /= total;
  return out;
}

// Keeps the k most probable tokens and renormalizes. k >= support size keeps
// everything.
inline TokenDistribution truncate_top_k(const TokenDistribution& d, int k) {
  if (k < 1) throw ParameterError("top_k must be >= 1");
  std::vector<TokenId> order = detail::ids_by_probability(d);
  TokenDistribution out;
  out.probs.resize(d.size(), 0.0);
  double total = 0.0;
  int kept = 0;
  for (TokenId id : order) {
    double p = d.probs[static_cast<size_t>(id)];
    if (p <= 0.0 || kept == k) break;
    out.probs[static_cast<size_t>(id)] = p;
    total += p;
    ++kept;
  }
  if (total <= 0.0) throw Error("top-k transform saw a zero-mass distribution");
  for (double& p : out.probs) p /= total;
  return out;
}

// Keeps the smallest probability-sorted prefix whose cumulative mass reaches
// p, then renormalizes. p = 1 keeps the entire support.
inline TokenDistribution truncate_nucleus(const TokenDistribution& d, double p) {
  if (!(p > 0.0) || p > 1.0) throw ParameterError("nucleus_p must lie in (0, 1]");
  std::vector<TokenId> order = detail::ids_by_probability(d);
  TokenDistribution out;
  out.probs.resize(d.size(), 0.0);
  double cumulative = 0.0;
  double total = 0.0;
  for (TokenId id : order) {
    double q = d.probs[static_cast<size_t>(id)];
    if (q <= 0.0) break;
    out.probs[static_cast<size_t>(id)] = q;
    total += q;
    cumulative += q;
    if (cumulative >= p - 1e-12) break;
  }
  if (total <= 0.0) throw Error("nucleus transform saw a zero-mass distribution");
  for (double& q : out.probs) q /= total;
  return out;
}

struct DistributionTransform {
  enum class Kind { kIdentity, kTemperature, kTopK, kNucleus };

  Kind kind = Kind::kIdentity;
  double temperature = 1.0;
  int k = 1;
  double p = 1.0;

  static DistributionTransform identity() { return {}; }
  static DistributionTransform with_temperature(double t) {
    return {Kind::kTemperature, t, 1, 1.0};
  }
  static DistributionTransform with_top_k(int k) {
    return {Kind::kTopK, 1.0, k, 1.0};
  }
  static DistributionTransform with_nucleus(double p) {
    return {Kind::kNucleus, 1.0, 1, p};
  }

  TokenDistribution apply(const TokenDistribution& d) const {
    switch (kind) {
      case Kind::kIdentity: return d;
      case Kind::kTemperature: return apply_temperature(d, temperature);
      case Kind::kTopK: return truncate_top_k(d, k);
      case Kind::kNucleus: return truncate_nucleus(d, p);
    }
    throw ParameterError("unknown transform kind");
  }
};

}  // namespace divdec::decode

#endif  // DIVDEC_TRANSFORMS_HPP_
