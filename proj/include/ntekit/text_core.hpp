#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "ntekit/common.hpp"
#include "ntekit/corpus_io.hpp"

namespace ntekit {

inline constexpr std::size_t kMaxSpanTokens = 40;

struct TurnBound {
  Role role = Role::user;
  TokenRange range;
  bool operator==(const TurnBound&) const = default;
};

struct Document {
  std::string doc_id;
  std::vector<std::string> tokens;
  // Sorted, disjoint, tiling [0, tokens.size()).
  std::vector<TokenRange> sentence_bounds;
  // Chat documents only; same tiling invariant.
  std::vector<TurnBound> turn_bounds;
  // Structural tokens (role markers) that never take part in spans or matches.
  std::vector<TokenRange> markup;
  // Span annotations supplied by an external chunker.
  std::optional<std::vector<TokenRange>> span_annotations;

  std::size_t size() const { return tokens.size(); }
  // Index of the turn holding `pos`, or nullopt.
  std::optional<std::size_t> turn_at(std::size_t pos) const;
  bool in_markup(const TokenRange& range) const;
};

struct CandidateSpan {
  std::size_t start = 0;
  std::size_t end = 0;
  std::string text;

  TokenRange range() const { return {start, end}; }
  std::size_t size() const { return end - start; }
  bool operator==(const CandidateSpan&) const = default;
};

// Word-level tokens: whitespace split, then leading and trailing ASCII
// punctuation detached one character per token. Casing is kept.
std::vector<std::string> tokenize_words(std::string_view text);

// tokenize_words plus sentence bounds. A sentence ends after `.`, `!` or `?`
// (with any closing punctuation glued to it) when whitespace and a capital
// letter follow, unless the period closes a guarded abbreviation.
Document tokenize(std::string doc_id, std::string_view text);

// Chat sample as one document: each turn opens with a role marker
// (`User :` / `Assistant :`) kept in its own sentence and in `markup`.
Document build_chat_document(const ChatRecord& record);

bool is_punctuation_token(std::string_view token);
bool is_abbreviation(std::string_view token);
std::string join_tokens(const std::vector<std::string>& tokens, std::size_t start, std::size_t end);
std::string to_lower_ascii(std::string_view text);

enum class PosTag : std::uint8_t {
  NOUN, PROPN, ADJ, NUM, DET, VERB, AUX, ADV, ADP, PRON, CCONJ, SCONJ, PART, INTJ, PUNCT, X
};

std::optional<PosTag> parse_pos_tag(std::string_view text);

// Coarse word -> tag table keyed by lowercase form. Unknown words are nouns.
class Lexicon {
 public:
  Lexicon() = default;
  static Lexicon load(const std::filesystem::path& path);

  void add(std::string word, PosTag tag);
  std::optional<PosTag> find(std::string_view lowercase_word) const;
  // Tag for a token in context. Capitalized open-class words away from the
  // sentence start become proper nouns.
  PosTag tag(std::string_view token, bool sentence_initial) const;
  std::size_t size() const { return entries_.size(); }

 private:
  std::unordered_map<std::string, PosTag> entries_;
};

class StopwordSet {
 public:
  StopwordSet() = default;
  explicit StopwordSet(std::initializer_list<std::string_view> words);
  static StopwordSet load(const std::filesystem::path& path);

  bool contains(std::string_view token) const;  // case-insensitive
  std::size_t size() const { return words_.size(); }

 private:
  std::unordered_set<std::string> words_;
};

enum class ProposalMode { heuristic, external };

// Noun-phrase-like candidate spans, sorted by start. Heuristic mode chunks
// DET? (ADJ|NUM|NOUN|PROPN)+ runs inside each sentence, trims leading and
// trailing determiners/stopwords and keeps runs holding a noun. External mode
// passes `document.span_annotations` through (DataError when absent).
std::vector<CandidateSpan> propose_spans(const Document& document, const StopwordSet& stopwords,
                                         const Lexicon& lexicon, ProposalMode mode,
                                         std::size_t max_span = kMaxSpanTokens);

}  // namespace ntekit
