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

#ifndef DIVDEC_TESTS_SUPPORT_FIXTURES_HPP_
#define DIVDEC_TESTS_SUPPORT_FIXTURES_HPP_

#include <initializer_list>
#include <string_view>
#include <utility>
#include <vector>

#include "divdec/core.hpp"
#include "divdec/rng.hpp"
#include "divdec/toymodel.hpp"

namespace divdec::testing {

// Dense distribution from (surface form, probability) pairs.
inline TokenDistribution dist(const Vocabulary& vocab,
                              std::initializer_list<std::pair<std::string_view, double>> entries) {
  TokenDistribution d;
  d.probs.assign(vocab.size(), 0.0);
  for (const auto& [tok, p] : entries) {
    d.probs[static_cast<size_t>(*vocab.id_of(tok))] = p;
  }
  return d;
}

inline std::vector<TokenId> ids(const Vocabulary& vocab, std::string_view text) {
  return tokenize(text, vocab);
}

// Random table model over `letters` non-structural tokens plus EOS, with
// every prefix up to depth max_len - 1 pinned to a random distribution.
// Every step leaves EOS some probability, so enumeration always terminates.
inline toy::TableModel random_table_model(Rng& rng, int letters, int max_len,
                                          const std::string& doc_id) {
  std::vector<std::string> words;
  for (int i = 0; i < letters; ++i) words.emplace_back(1, static_cast<char>('a' + i));
  Vocabulary vocab(words);

  auto random_dist = [&]() {
    TokenDistribution d;
    d.probs.assign(vocab.size(), 0.0);
    double total = 0.0;
    d.probs[Vocabulary::kEos] = rng.next_double() + 0.05;
    total += d.probs[Vocabulary::kEos];
    for (int i = 0; i < letters; ++i) {
      size_t id = static_cast<size_t>(Vocabulary::kNumReserved + i);
      if (rng.next_below(5) == 0) continue;  // occasional hard zero
      d.probs[id] = rng.next_double() + 1e-3;
      total += d.probs[id];
    }
    for (double& p : d.probs) p /= total;
    return d;
  };

  toy::TableModel model(vocab, random_dist());

  // Enumerate all letter prefixes of length < max_len and pin each one.
  std::vector<std::vector<TokenId>> frontier = {{}};
  for (int depth = 0; depth < max_len - 1; ++depth) {
    std::vector<std::vector<TokenId>> next;
    for (const auto& prefix : frontier) {
      for (int i = 0; i < letters; ++i) {
        std::vector<TokenId> extended = prefix;
        extended.push_back(static_cast<TokenId>(Vocabulary::kNumReserved + i));
        model.set(doc_id, extended, random_dist());
        next.push_back(std::move(extended));
      }
    }
    frontier = std::move(next);
  }
  model.set(doc_id, {}, random_dist());
  return model;
}

}  // namespace divdec::testing

#endif  // DIVDEC_TESTS_SUPPORT_FIXTURES_HPP_
