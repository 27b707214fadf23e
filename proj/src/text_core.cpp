#include "ntekit/text_core.hpp"

#include <algorithm>
#include <array>
#include <fstream>

namespace ntekit {
namespace {

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

bool is_punct(char c) {
  auto u = static_cast<unsigned char>(c);
  return (u >= 33 && u <= 47) || (u >= 58 && u <= 64) || (u >= 91 && u <= 96) ||
         (u >= 123 && u <= 126);
}

bool is_upper(char c) { return c >= 'A' && c <= 'Z'; }

bool is_terminator(std::string_view token) {
  return token == "." || token == "!" || token == "?";
}

bool is_closer(std::string_view token) {
  return token == "\"" || token == "'" || token == ")" || token == "]" || token == "}";
}

constexpr std::array<std::string_view, 48> kAbbreviations = {
    "Mr",  "Mrs", "Ms",   "Dr",  "Prof", "Sr",  "Jr",  "St",  "Mt",  "Ft",  "Gen", "Gov",
    "Sen", "Rep", "Lt",   "Col", "Capt", "Sgt", "Cpl", "Rev", "Hon", "Inc", "Ltd", "Co",
    "Corp", "Bros", "No", "vs",  "etc",  "al",  "cf",  "approx", "dept", "est", "fig", "Jan",
    "Feb", "Mar", "Apr",  "Jun", "Jul",  "Aug", "Sep", "Sept", "Oct", "Nov", "Dec", "Ave"};

struct RawToken {
  std::string text;
  bool space_after = false;
};

std::vector<RawToken> split_tokens(std::string_view text) {
  std::vector<RawToken> out;
  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    while (i < n && is_space(text[i])) ++i;
    if (i >= n) break;
    std::size_t j = i;
    while (j < n && !is_space(text[j])) ++j;
    std::string_view chunk = text.substr(i, j - i);
    std::size_t lead = 0;
    while (lead < chunk.size() && is_punct(chunk[lead])) ++lead;
    std::size_t trail = chunk.size();
    while (trail > lead && is_punct(chunk[trail - 1])) --trail;
    for (std::size_t p = 0; p < lead; ++p) out.push_back({std::string(1, chunk[p]), false});
    if (trail > lead) out.push_back({std::string(chunk.substr(lead, trail - lead)), false});
    for (std::size_t p = trail; p < chunk.size(); ++p) out.push_back({std::string(1, chunk[p]), false});
    out.back().space_after = j < n;
    i = j;
  }
  return out;
}

}  // namespace

std::optional<std::size_t> Document::turn_at(std::size_t pos) const {
  auto it = std::upper_bound(turn_bounds.begin(), turn_bounds.end(), pos,
                             [](std::size_t p, const TurnBound& b) { return p < b.range.start; });
  if (it == turn_bounds.begin()) return std::nullopt;
  --it;
  if (!it->range.contains(pos)) return std::nullopt;
  return static_cast<std::size_t>(it - turn_bounds.begin());
}

bool Document::in_markup(const TokenRange& range) const {
  return std::any_of(markup.begin(), markup.end(),
                     [&](const TokenRange& m) { return m.overlaps(range); });
}

bool is_punctuation_token(std::string_view token) {
  return !token.empty() && std::all_of(token.begin(), token.end(), is_punct);
}

bool is_abbreviation(std::string_view token) {
  if (token.size() == 1 && is_upper(token[0])) return true;  // initials
  if (token.find('.') != std::string_view::npos) return true;  // U.S, e.g
  return std::find(kAbbreviations.begin(), kAbbreviations.end(), token) != kAbbreviations.end();
}

std::string to_lower_ascii(std::string_view text) {
  std::string out(text);
  for (char& c : out) {
    if (is_upper(c)) c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

std::string join_tokens(const std::vector<std::string>& tokens, std::size_t start, std::size_t end) {
  std::string out;
  for (std::size_t i = start; i < end && i < tokens.size(); ++i) {
    if (i > start) out += ' ';
    out += tokens[i];
  }
  return out;
}

std::vector<std::string> tokenize_words(std::string_view text) {
  std::vector<std::string> out;
  for (auto& tok : split_tokens(text)) out.push_back(std::move(tok.text));
  return out;
}

Document tokenize(std::string doc_id, std::string_view text) {
  Document doc;
  doc.doc_id = std::move(doc_id);
  std::vector<RawToken> raw = split_tokens(text);
  const std::size_t n = raw.size();
  doc.tokens.reserve(n);
  std::size_t sentence_start = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!is_terminator(raw[i].text)) continue;
    if (raw[i].text == "." && i > 0 && !raw[i - 1].space_after && is_abbreviation(raw[i - 1].text)) {
      continue;
    }
    std::size_t j = i + 1;
    while (j < n && !raw[j - 1].space_after &&
           (is_terminator(raw[j].text) || is_closer(raw[j].text))) {
      ++j;
    }
    if (j < n && raw[j - 1].space_after && is_upper(raw[j].text[0])) {
      doc.sentence_bounds.push_back({sentence_start, j});
      sentence_start = j;
    }
    i = j - 1;
  }
  if (sentence_start < n) doc.sentence_bounds.push_back({sentence_start, n});
  for (auto& tok : raw) doc.tokens.push_back(std::move(tok.text));
  return doc;
}

Document build_chat_document(const ChatRecord& record) {
  Document doc;
  doc.doc_id = record.doc_id;
  for (const auto& turn : record.turns) {
    const std::size_t turn_start = doc.tokens.size();
    doc.tokens.push_back(turn.role == Role::user ? "User" : "Assistant");
    doc.tokens.push_back(":");
    doc.markup.push_back({turn_start, turn_start + 2});
    doc.sentence_bounds.push_back({turn_start, turn_start + 2});
    Document body = tokenize(record.doc_id, turn.text);
    const std::size_t offset = doc.tokens.size();
    for (auto& tok : body.tokens) doc.tokens.push_back(std::move(tok));
    for (const auto& s : body.sentence_bounds) {
      doc.sentence_bounds.push_back({s.start + offset, s.end + offset});
    }
    doc.turn_bounds.push_back({turn.role, {turn_start, doc.tokens.size()}});
  }
  return doc;
}

std::optional<PosTag> parse_pos_tag(std::string_view text) {
  static constexpr std::array<std::pair<std::string_view, PosTag>, 16> kNames = {{
      {"NOUN", PosTag::NOUN}, {"PROPN", PosTag::PROPN}, {"ADJ", PosTag::ADJ},
      {"NUM", PosTag::NUM},   {"DET", PosTag::DET},     {"VERB", PosTag::VERB},
      {"AUX", PosTag::AUX},   {"ADV", PosTag::ADV},     {"ADP", PosTag::ADP},
      {"PRON", PosTag::PRON}, {"CCONJ", PosTag::CCONJ}, {"SCONJ", PosTag::SCONJ},
      {"PART", PosTag::PART}, {"INTJ", PosTag::INTJ},   {"PUNCT", PosTag::PUNCT},
      {"X", PosTag::X},
  }};
  for (const auto& [name, tag] : kNames) {
    if (name == text) return tag;
  }
  return std::nullopt;
}

Lexicon Lexicon::load(const std::filesystem::path& path) {
  LineReader lines(path);
  Lexicon lexicon;
  std::string line;
  while (lines.next(line)) {
    if (line.empty() || line[0] == '#') continue;
    auto sep = line.find_first_of("\t ");
    if (sep == std::string::npos) {
      throw DataError(path.string() + ":" + std::to_string(lines.line_number()) +
                      ": expected token and tag");
    }
    auto tag_start = line.find_first_not_of("\t ", sep);
    auto tag = parse_pos_tag(std::string_view(line).substr(tag_start == std::string::npos ? line.size() : tag_start));
    if (!tag) {
      throw DataError(path.string() + ":" + std::to_string(lines.line_number()) + ": unknown tag");
    }
    lexicon.add(to_lower_ascii(std::string_view(line).substr(0, sep)), *tag);
  }
  return lexicon;
}

void Lexicon::add(std::string word, PosTag tag) { entries_.insert_or_assign(std::move(word), tag); }

std::optional<PosTag> Lexicon::find(std::string_view lowercase_word) const {
  thread_local std::string key;
  key.assign(lowercase_word);
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

PosTag Lexicon::tag(std::string_view token, bool sentence_initial) const {
  if (token.empty()) return PosTag::X;
  if (is_punctuation_token(token)) return PosTag::PUNCT;
  if (token[0] >= '0' && token[0] <= '9') return PosTag::NUM;
  const bool capitalized = is_upper(token[0]);
  thread_local std::string lowered;
  lowered.assign(token);
  for (char& c : lowered) {
    if (is_upper(c)) c = static_cast<char>(c - 'A' + 'a');
  }
  auto found = find(lowered);
  if (!found) return capitalized ? PosTag::PROPN : PosTag::NOUN;
  const bool open_class = *found == PosTag::NOUN || *found == PosTag::VERB ||
                          *found == PosTag::ADJ || *found == PosTag::ADV;
  if (capitalized && open_class && !sentence_initial) return PosTag::PROPN;
  return *found;
}

StopwordSet::StopwordSet(std::initializer_list<std::string_view> words) {
  for (auto w : words) words_.insert(to_lower_ascii(w));
}

StopwordSet StopwordSet::load(const std::filesystem::path& path) {
  LineReader lines(path);
  StopwordSet set;
  std::string line;
  while (lines.next(line)) {
    auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    auto last = line.find_last_not_of(" \t");
    set.words_.insert(to_lower_ascii(std::string_view(line).substr(first, last - first + 1)));
  }
  return set;
}

bool StopwordSet::contains(std::string_view token) const {
  thread_local std::string lowered;
  lowered.assign(token);
  for (char& c : lowered) {
    if (is_upper(c)) c = static_cast<char>(c - 'A' + 'a');
  }
  return words_.count(lowered) != 0;
}

std::vector<CandidateSpan> propose_spans(const Document& document, const StopwordSet& stopwords,
                                         const Lexicon& lexicon, ProposalMode mode,
                                         std::size_t max_span) {
  std::vector<CandidateSpan> out;
  const auto& tokens = document.tokens;
  if (mode == ProposalMode::external) {
    if (!document.span_annotations) {
      throw DataError("external span mode but " + document.doc_id + " has no span annotations");
    }
    for (const auto& r : *document.span_annotations) {
      if (r.start >= r.end || r.end > tokens.size()) {
        throw DataError("span annotation out of range in " + document.doc_id);
      }
      if (r.size() > max_span) continue;
      out.push_back({r.start, r.end, join_tokens(tokens, r.start, r.end)});
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const CandidateSpan& a, const CandidateSpan& b) { return a.start < b.start; });
    return out;
  }

  auto is_content = [](PosTag t) {
    return t == PosTag::NOUN || t == PosTag::PROPN || t == PosTag::ADJ || t == PosTag::NUM;
  };
  std::vector<PosTag> tags;
  for (const auto& sentence : document.sentence_bounds) {
    if (document.in_markup(sentence)) continue;
    tags.clear();
    for (std::size_t i = sentence.start; i < sentence.end; ++i) {
      tags.push_back(lexicon.tag(tokens[i], i == sentence.start));
    }
    auto emit = [&](std::size_t begin, std::size_t end) {
      // Trim determiners and stopwords from both edges.
      while (begin < end && (tags[begin - sentence.start] == PosTag::DET ||
                             stopwords.contains(tokens[begin]))) {
        ++begin;
      }
      while (end > begin && (tags[end - 1 - sentence.start] == PosTag::DET ||
                             stopwords.contains(tokens[end - 1]))) {
        --end;
      }
      if (begin >= end) return;
      bool has_noun = false;
      for (std::size_t i = begin; i < end; ++i) {
        PosTag t = tags[i - sentence.start];
        has_noun |= t == PosTag::NOUN || t == PosTag::PROPN;
      }
      if (!has_noun) return;
      if (end - begin > max_span) begin = end - max_span;
      out.push_back({begin, end, join_tokens(tokens, begin, end)});
    };
    std::size_t run_start = sentence.start;
    bool in_run = false;
    for (std::size_t i = sentence.start; i < sentence.end; ++i) {
      PosTag t = tags[i - sentence.start];
      if (t == PosTag::DET) {
        if (in_run) emit(run_start, i);
        run_start = i;
        in_run = true;
      } else if (is_content(t)) {
        if (!in_run) {
          run_start = i;
          in_run = true;
        }
      } else if (in_run) {
        emit(run_start, i);
        in_run = false;
      }
    }
    if (in_run) emit(run_start, sentence.end);
  }
  return out;
}

}  // namespace ntekit
