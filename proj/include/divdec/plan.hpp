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
 * Entity-chain plans.
 *
 * A plan is an ordered list of chain sentences, each an ordered list of
 * entity strings. The wire format separates entities with " | ", chain
 * sentences with " ||| ", and brackets the plan between the "[CONTENT]" and
 * "[SUMMARY]" markers of a planned target:
 *
 *   [CONTENT] Eden Hazard | Chelsea ||| London | 2012 [SUMMARY] <text>
 *
 * Canonical form carries no trailing empty chain sentence; the degenerate
 * all-empty plan is a single empty sentence. parse_chain() normalizes a
 * trailing separator (as printed in source-paper style figures) away.
 */

#ifndef DIVDEC_PLAN_HPP_
#define DIVDEC_PLAN_HPP_

#include <cctype>
#include <string>
#include <string_view>
#include <vector>

#include "divdec/error.hpp"
#include "divdec/stopwords.hpp"

namespace divdec::plan {

inline constexpr std::string_view kContentMark = "[CONTENT]";
inline constexpr std::string_view kSummaryMark = "[SUMMARY]";
inline constexpr std::string_view kEntitySep = " | ";
inline constexpr std::string_view kSentenceSep = " ||| ";

struct Composition {
  // sentences[i] lists the entities of chain sentence i, in order.
  std::vector<std::vector<std::string>> sentences;

  bool operator==(const Composition&) const = default;

  bool empty() const {
    for (const auto& s : sentences) {
      if (!s.empty()) return false;
    }
    return true;
  }
};

struct PlannedTarget {
  Composition composition;
  std::string output_text;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

inline std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

inline bool is_word_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) != 0;
}

inline std::vector<std::string_view> split_on(std::string_view text,
                                              std::string_view sep) {
  std::vector<std::string_view> parts;
  size_t pos = 0;
  while (true) {
    size_t hit = text.find(sep, pos);
    if (hit == std::string_view::npos) {
      parts.push_back(text.substr(pos));
      return parts;
    }
    parts.push_back(text.substr(pos, hit - pos));
    pos = hit + sep.size();
  }
}

inline std::vector<std::string> whitespace_tokens(std::string_view text) {
  std::vector<std::string> tokens;
  size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    size_t start = i;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i > start) tokens.emplace_back(text.substr(start, i - start));
  }
  return tokens;
}

}  // namespace detail

// Drops trailing empty chain sentences; an all-empty plan collapses to the
// canonical single empty sentence.
inline Composition canonical(Composition c) {
  while (c.sentences.size() > 1 && c.sentences.back().empty()) {
    c.sentences.pop_back();
  }
  if (c.sentences.empty() || (c.sentences.size() == 1 && c.sentences[0].empty())) {
    c.sentences = {{}};
  }
  return c;
}

inline void validate_composition(const Composition& c) {
  if (c.sentences.empty()) {
    throw MalformedPlanError("composition has no chain sentences");
  }
  for (const auto& sentence : c.sentences) {
    for (const auto& entity : sentence) {
      if (entity.empty()) {
        throw MalformedPlanError("empty entity string in composition");
      }
      if (entity.find('|') != std::string::npos) {
        throw MalformedPlanError("entity contains a separator character: " + entity);
      }
    }
  }
}

inline std::string serialize_composition(const Composition& c) {
  validate_composition(c);
  std::string out;
  for (size_t i = 0; i < c.sentences.size(); ++i) {
    if (i > 0) out += kSentenceSep;
    const auto& sentence = c.sentences[i];
    for (size_t j = 0; j < sentence.size(); ++j) {
      if (j > 0) out += kEntitySep;
      out += sentence[j];
    }
  }
  return out;
}

// Parses the body between the plan markers. Tolerates ragged spacing and a
// trailing separator; the result is canonical.
inline Composition parse_chain(std::string_view chain_text) {
  Composition c;
  for (std::string_view sent : detail::split_on(chain_text, "|||")) {
    std::vector<std::string> entities;
    for (std::string_view ent : detail::split_on(sent, "|")) {
      std::string_view t = detail::trim(ent);
      if (!t.empty()) entities.emplace_back(t);
    }
    c.sentences.push_back(std::move(entities));
  }
  return canonical(std::move(c));
}

inline std::string serialize_planned_target(const PlannedTarget& target) {
  std::string out(kContentMark);
  std::string chain = serialize_composition(target.composition);
  if (!chain.empty()) {
    out += ' ';
    out += chain;
  }
  out += ' ';
  out += kSummaryMark;
  if (!target.output_text.empty()) {
    out += ' ';
    out += target.output_text;
  }
  return out;
}

inline PlannedTarget parse_planned_target(std::string_view text) {
  size_t content = text.find(kContentMark);
  size_t summary = text.find(kSummaryMark);
  if (content == std::string_view::npos || summary == std::string_view::npos ||
      summary < content) {
    throw MalformedPlanError("planned target missing ordered [CONTENT]/[SUMMARY] markers");
  }
  size_t chain_begin = content + kContentMark.size();
  std::string_view chain_text = text.substr(chain_begin, summary - chain_begin);
  std::string_view output = detail::trim(text.substr(summary + kSummaryMark.size()));
  return PlannedTarget{parse_chain(chain_text), std::string(output)};
}

// Splits on sentence-final . ! ? followed by whitespace or end of text; the
// terminal stays attached to its sentence, and trailing unterminated text
// counts as a sentence.
inline std::vector<std::string> split_sentences(std::string_view text) {
  std::vector<std::string> sentences;
  size_t start = 0;
  for (size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    bool terminal = (c == '.' || c == '!' || c == '?');
    bool at_break = terminal && (i + 1 == text.size() ||
                                 std::isspace(static_cast<unsigned char>(text[i + 1])));
    if (at_break) {
      std::string_view piece = detail::trim(text.substr(start, i + 1 - start));
      if (!piece.empty()) sentences.emplace_back(piece);
      start = i + 1;
    }
  }
  std::string_view tail = detail::trim(text.substr(start));
  if (!tail.empty()) sentences.emplace_back(tail);
  return sentences;
}

// Heuristic entity extraction from one sentence: maximal runs of capitalized
// tokens (joined by single spaces) and standalone numbers, in order of first
// appearance. A lone sentence-initial capitalized stopword is not an entity;
// adjacent duplicate entities collapse.
inline std::vector<std::string> extract_entities(std::string_view sentence) {
  std::vector<std::string> tokens = detail::whitespace_tokens(sentence);

  std::vector<std::string> entities;
  std::string run;
  int run_length = 0;
  size_t run_start_tok = 0;

  auto flush_run = [&](void) {
    if (run.empty()) return;
    bool initial_stopword =
        run_start_tok == 0 && run_length == 1 && is_stopword(run);
    if (!initial_stopword) entities.push_back(run);
    run.clear();
    run_length = 0;
  };

  for (size_t t = 0; t < tokens.size(); ++t) {
    // Strip surrounding punctuation so "Chelsea," and "(Arsenal)" classify.
    std::string_view raw = tokens[t];
    size_t b = 0, e = raw.size();
    while (b < e && !detail::is_word_char(raw[b])) ++b;
    while (e > b && !detail::is_word_char(raw[e - 1])) --e;
    std::string_view core = raw.substr(b, e - b);

    if (core.empty()) {
      flush_run();
      continue;
    }

    bool numeric = true;
    for (char c : core) {
      if (!std::isdigit(static_cast<unsigned char>(c))) {
        numeric = false;
        break;
      }
    }
    bool capitalized = std::isupper(static_cast<unsigned char>(core[0])) != 0;

    if (numeric) {
      flush_run();
      entities.emplace_back(core);
    } else if (capitalized) {
      if (run.empty()) run_start_tok = t;
      if (!run.empty()) run += ' ';
      run += core;
      ++run_length;
    } else {
      flush_run();
    }
  }
  flush_run();

  std::vector<std::string> deduped;
  for (auto& e : entities) {
    if (deduped.empty() || deduped.back() != e) deduped.push_back(std::move(e));
  }
  return deduped;
}

// One chain sentence per reference sentence, in reference order. The result
// is intentionally not canonicalized: callers relying on per-sentence
// alignment get exactly one entry per input sentence, possibly empty.
inline Composition build_chain(std::string_view reference) {
  Composition c;
  for (const std::string& sentence : split_sentences(reference)) {
    c.sentences.push_back(extract_entities(sentence));
  }
  if (c.sentences.empty()) c.sentences = {{}};
  return c;
}

// Case-insensitive whole-word substring test: every match boundary must be a
// non-alphanumeric character or the string edge.
inline bool entity_supported(std::string_view entity, std::string_view source) {
  std::string needle = detail::lower(detail::trim(entity));
  if (needle.empty()) return false;
  std::string hay = detail::lower(source);
  size_t pos = 0;
  while ((pos = hay.find(needle, pos)) != std::string::npos) {
    bool left_ok = pos == 0 || !detail::is_word_char(hay[pos - 1]);
    size_t end = pos + needle.size();
    bool right_ok = end == hay.size() || !detail::is_word_char(hay[end]);
    if (left_ok && right_ok) return true;
    ++pos;
  }
  return false;
}

enum class ConstraintMode {
  // Replace an unsupported entity by its longest source-supported token
  // suffix ("Emma Smith" -> "Smith") before giving up on it.
  kSuffixRescue,
  // Drop unsupported entities outright.
  kDropWhole,
};

// Filters a plan down to entities the source document supports. Interior
// empty chain sentences are retained; the result is canonical.
inline Composition constrain_composition(const Composition& c,
                                         std::string_view source,
                                         ConstraintMode mode = ConstraintMode::kSuffixRescue) {
  validate_composition(c);
  Composition out;
  for (const auto& sentence : c.sentences) {
    std::vector<std::string> kept;
    for (const auto& entity : sentence) {
      if (entity_supported(entity, source)) {
        kept.push_back(entity);
        continue;
      }
      if (mode == ConstraintMode::kSuffixRescue) {
        std::vector<std::string> words = detail::whitespace_tokens(entity);
        for (size_t i = 1; i < words.size(); ++i) {
          std::string suffix;
          for (size_t j = i; j < words.size(); ++j) {
            if (!suffix.empty()) suffix += ' ';
            suffix += words[j];
          }
          if (entity_supported(suffix, source)) {
            kept.push_back(std::move(suffix));
            break;
          }
        }
      }
    }
    out.sentences.push_back(std::move(kept));
  }
  return canonical(std::move(out));
}

}  // namespace divdec::plan

#endif  // DIVDEC_PLAN_HPP_
