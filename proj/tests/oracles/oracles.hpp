#pragma once

// Independent reference implementations used by the unit and acceptance
// tests. Deliberately naive: quadratic or cubic scans, no hashing.

#include <algorithm>
#include <cstddef>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "ntekit/corpus_io.hpp"
#include "ntekit/text_core.hpp"

namespace oracle {

using ntekit::Tag;
using ntekit::TokenRange;
using ntekit::Triplet;

inline bool in_markup(const ntekit::Document& doc, std::size_t pos) {
  return std::any_of(doc.markup.begin(), doc.markup.end(),
                     [&](const TokenRange& m) { return m.contains(pos); });
}

inline bool same_run(const ntekit::Document& doc, std::size_t a, std::size_t b, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    if (in_markup(doc, a + i) || in_markup(doc, b + i)) return false;
    if (doc.tokens[a + i] != doc.tokens[b + i]) return false;
  }
  return true;
}

// Every (t, k, n) for every candidate, by direct comparison.
inline std::vector<Triplet> triplets(const ntekit::Document& doc,
                                     const std::vector<ntekit::CandidateSpan>& candidates) {
  std::vector<Triplet> out;
  for (const auto& c : candidates) {
    const std::size_t t = c.start, n = c.end - c.start;
    if (n == 0 || c.end > doc.size()) continue;
    for (std::size_t k = 0; k + n <= t; ++k) {
      if (same_run(doc, k, t, n)) out.push_back({t, k, n});
    }
  }
  return out;
}

// All (t, k, n) in the document for every t and n <= max_n.
inline std::set<Triplet> all_triplets(const std::vector<std::string>& tokens, std::size_t max_n) {
  std::set<Triplet> out;
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    for (std::size_t n = 1; n <= max_n && t + n <= tokens.size(); ++n) {
      for (std::size_t k = 0; k + n <= t; ++k) {
        if (std::equal(tokens.begin() + k, tokens.begin() + k + n, tokens.begin() + t)) {
          out.insert({t, k, n});
        }
      }
    }
  }
  return out;
}

// Left-to-right scan of `context` for `target`; each match not overlapping
// the previous tagged run becomes B I*.
inline std::vector<Tag> scan_tags(const std::vector<std::string>& context,
                                  const std::vector<std::string>& target) {
  std::vector<Tag> tags(context.size(), Tag::O);
  const std::size_t n = target.size();
  std::size_t free_from = 0;
  for (std::size_t i = 0; n > 0 && i + n <= context.size(); ++i) {
    if (i < free_from) continue;
    bool match = true;
    for (std::size_t j = 0; j < n && match; ++j) match = context[i + j] == target[j];
    if (!match) continue;
    tags[i] = Tag::B;
    for (std::size_t j = 1; j < n; ++j) tags[i + j] = Tag::I;
    free_from = i + n;
  }
  return tags;
}

// Greedy non-overlap: sort by (start asc, length desc), keep if disjoint
// from the last kept span.
inline std::vector<TokenRange> disjoint_spans(const std::vector<ntekit::CandidateSpan>& cands,
                                              std::size_t max_span) {
  std::vector<TokenRange> spans;
  for (const auto& c : cands) {
    if (c.end > c.start && c.end - c.start <= max_span) spans.push_back({c.start, c.end});
  }
  std::sort(spans.begin(), spans.end(), [](const TokenRange& a, const TokenRange& b) {
    return a.start != b.start ? a.start < b.start : a.end > b.end;
  });
  std::vector<TokenRange> kept;
  for (const auto& s : spans) {
    if (kept.empty() || s.start >= kept.back().end) kept.push_back(s);
  }
  return kept;
}

struct Violation {
  std::string doc_id;
  std::string what;
};

// Soundness and completeness of one emitted instance.
//  - every maximal B(I)* run covers exactly the target tokens
//  - positives have a run, negatives have none and the target never occurs
//  - every occurrence of the target in the context is a tagged run or
//    overlaps one (overlapping repeats cannot both be tagged)
inline std::optional<std::string> check_instance(const ntekit::NTEInstance& inst,
                                                 std::size_t window) {
  const auto& ctx = inst.context_tokens;
  const auto& tgt = inst.target_tokens;
  const std::size_t n = tgt.size();
  if (inst.tags.size() != ctx.size()) return "tags/context length mismatch";
  if (ctx.size() > window) return "context longer than window";
  if (n == 0) return "empty target";
  std::vector<TokenRange> runs;
  for (std::size_t i = 0; i < ctx.size();) {
    if (inst.tags[i] == Tag::O) {
      ++i;
      continue;
    }
    if (inst.tags[i] == Tag::I) return "I without B at " + std::to_string(i);
    std::size_t j = i + 1;
    while (j < ctx.size() && inst.tags[j] == Tag::I) ++j;
    runs.push_back({i, j});
    i = j;
  }
  for (const auto& r : runs) {
    if (r.size() != n || !std::equal(tgt.begin(), tgt.end(), ctx.begin() + r.start)) {
      return "run at " + std::to_string(r.start) + " does not decode to the target";
    }
  }
  std::vector<std::size_t> occurrences;
  for (std::size_t i = 0; i + n <= ctx.size(); ++i) {
    if (std::equal(tgt.begin(), tgt.end(), ctx.begin() + i)) occurrences.push_back(i);
  }
  if (inst.polarity == ntekit::Polarity::negative) {
    if (!runs.empty()) return "negative with tags";
    if (!occurrences.empty()) return "negative target occurs in context";
    if (!inst.triplets.empty()) return "negative with triplets";
    return std::nullopt;
  }
  if (runs.empty()) return "positive without B";
  for (std::size_t occ : occurrences) {
    const TokenRange r{occ, occ + n};
    const bool covered = std::any_of(runs.begin(), runs.end(),
                                     [&](const TokenRange& run) { return run.overlaps(r); });
    if (!covered) return "untagged occurrence at " + std::to_string(occ);
  }
  if (inst.triplets.size() != runs.size()) return "triplet count differs from run count";
  return std::nullopt;
}

// Random document over a small vocabulary, one sentence.
inline ntekit::Document random_document(std::mt19937_64& rng, std::string id) {
  std::uniform_int_distribution<std::size_t> vocab_dist(5, 50), len_dist(1, 80);
  const std::size_t vocab = vocab_dist(rng), len = len_dist(rng);
  std::uniform_int_distribution<std::size_t> word(0, vocab - 1);
  ntekit::Document doc;
  doc.doc_id = std::move(id);
  for (std::size_t i = 0; i < len; ++i) doc.tokens.push_back("w" + std::to_string(word(rng)));
  doc.sentence_bounds.push_back({0, len});
  return doc;
}

// Random candidate spans (possibly overlapping), sorted by start.
inline std::vector<ntekit::CandidateSpan> random_candidates(std::mt19937_64& rng,
                                                            const ntekit::Document& doc) {
  std::vector<ntekit::CandidateSpan> out;
  const std::size_t n = doc.size();
  std::uniform_int_distribution<std::size_t> count(0, n), len(1, 6);
  const std::size_t c = count(rng);
  for (std::size_t i = 0; i < c; ++i) {
    std::uniform_int_distribution<std::size_t> start(0, n - 1);
    const std::size_t s = start(rng);
    const std::size_t e = std::min(n, s + len(rng));
    out.push_back({s, e, ntekit::join_tokens(doc.tokens, s, e)});
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return a.start != b.start ? a.start < b.start : a.end < b.end;
  });
  return out;
}

}  // namespace oracle
