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

#ifndef DIVDEC_STOPWORDS_HPP_
#define DIVDEC_STOPWORDS_HPP_

#include <array>
#include <string>
#include <string_view>
#include <unordered_set>

namespace divdec {

// Fixed 50-word English function-word list, shared by entity extraction and
// the lexical entailment proxy. A copy ships as data/stopwords.txt.
inline const std::unordered_set<std::string>& stopwords() {
  static const std::unordered_set<std::string> kSet = [] {
    constexpr std::array<std::string_view, 50> kWords = {
        "the",  "a",     "an",     "and",    "or",     "but",   "if",
        "of",   "at",    "by",     "for",    "with",   "about", "into",
        "through", "during", "before", "after", "to",   "from",  "up",
        "down", "in",    "out",    "on",     "off",    "over",  "under",
        "again", "once", "here",   "there",  "all",    "any",   "both",
        "each", "he",    "she",    "it",     "they",   "we",    "you",
        "i",    "is",    "are",    "was",    "were",   "has",   "have",
        "had"};
    std::unordered_set<std::string> set;
    for (auto w : kWords) set.emplace(w);
    return set;
  }();
  return kSet;
}

inline bool is_stopword(std::string_view word) {
  std::string lower(word);
  for (char& c : lower) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return stopwords().count(lower) > 0;
}

}  // namespace divdec

#endif  // DIVDEC_STOPWORDS_HPP_
