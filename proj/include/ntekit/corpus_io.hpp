#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ntekit/common.hpp"

namespace ntekit {

struct RawTextRecord {
  std::string doc_id;
  std::string text;
  // Optional externally chunked spans as [start, end) over tokenize(text).
  std::optional<std::vector<TokenRange>> spans;
  bool operator==(const RawTextRecord&) const = default;
};

struct ChatTurn {
  Role role = Role::user;
  std::string text;
  bool operator==(const ChatTurn&) const = default;
};

struct ChatRecord {
  std::string doc_id;
  std::vector<ChatTurn> turns;
  bool operator==(const ChatRecord&) const = default;
};

struct EntitySpan {
  std::string label;
  std::size_t start = 0;
  std::size_t end = 0;
  // Benchmarks built by relabeling keep the other entities around but only
  // score the relabeled ones.
  bool scoring = true;
  bool operator==(const EntitySpan&) const = default;
};

struct GoldEntityRecord {
  std::string doc_id;
  std::vector<std::string> tokens;
  std::vector<EntitySpan> entities;
  std::optional<std::string> instruction;
  bool operator==(const GoldEntityRecord&) const = default;
};

struct GoldMRCRecord {
  std::string doc_id;
  std::string context;
  std::string question;
  std::vector<std::string> answers;  // empty = unanswerable
  std::optional<std::string> instruction;
  bool operator==(const GoldMRCRecord&) const = default;
};

// One duplication: the n tokens at the cut t repeat the n tokens at k.
struct Triplet {
  std::size_t t = 0;
  std::size_t k = 0;
  std::size_t n = 0;
  bool operator==(const Triplet&) const = default;
  auto operator<=>(const Triplet&) const = default;
};

struct NTEInstance {
  std::string doc_id;
  Stage stage = Stage::pretrain;
  Polarity polarity = Polarity::positive;
  std::vector<std::string> context_tokens;
  std::vector<Tag> tags;
  std::vector<std::string> target_tokens;
  std::vector<Triplet> triplets;
  bool operator==(const NTEInstance&) const = default;
};

// Reads LF-terminated lines one at a time; a trailing CR is dropped.
class LineReader {
 public:
  explicit LineReader(const std::filesystem::path& path);

  bool next(std::string& line);
  // 1-based number of the line most recently returned.
  std::size_t line_number() const { return line_number_; }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::ifstream in_;
  std::size_t line_number_ = 0;
};

// Line parsers. Errors are DataError("line N: ...").
RawTextRecord parse_raw_line(std::string_view line, std::size_t line_number);
// Returns nullopt when the record lacks a user or an assistant turn.
std::optional<ChatRecord> parse_chat_line(std::string_view line, std::size_t line_number);
GoldMRCRecord parse_mrc_line(std::string_view line, std::size_t line_number);
GoldEntityRecord parse_entity_line(std::string_view line, std::size_t line_number);
NTEInstance parse_nte_line(std::string_view line, std::size_t line_number);

// Serializers produce one line without the trailing newline, keys in a fixed
// order.
std::string to_jsonl(const RawTextRecord& record);
std::string to_jsonl(const ChatRecord& record);
std::string to_jsonl(const GoldMRCRecord& record);
std::string to_jsonl(const GoldEntityRecord& record);
std::string to_jsonl(const NTEInstance& instance);
// CoNLL block: one `token tag` line per token followed by a blank line.
std::string to_conll(const GoldEntityRecord& record);

template <typename Record, Record (*Parse)(std::string_view, std::size_t)>
class JsonlStream {
 public:
  explicit JsonlStream(const std::filesystem::path& path) : lines_(path) {}

  std::optional<Record> next() {
    std::string line;
    while (lines_.next(line)) {
      if (line.empty()) continue;
      return Parse(line, lines_.line_number());
    }
    return std::nullopt;
  }

 private:
  LineReader lines_;
};

using RawJsonlReader = JsonlStream<RawTextRecord, parse_raw_line>;
using MrcJsonlReader = JsonlStream<GoldMRCRecord, parse_mrc_line>;
using EntityJsonlReader = JsonlStream<GoldEntityRecord, parse_entity_line>;
using NteJsonlReader = JsonlStream<NTEInstance, parse_nte_line>;

class ChatJsonlReader {
 public:
  explicit ChatJsonlReader(const std::filesystem::path& path) : lines_(path) {}

  std::optional<ChatRecord> next();
  std::size_t skipped() const { return skipped_; }

 private:
  LineReader lines_;
  std::size_t skipped_ = 0;
};

// Column-format reader: first column token, last column BIO tag, blank line
// between sentences, `-DOCSTART-` lines ignored. Records are numbered by
// sentence index ("0", "1", ...). An I-X that does not continue an X run is
// promoted to B-X and counted.
class ConllReader {
 public:
  explicit ConllReader(const std::filesystem::path& path) : lines_(path) {}

  std::optional<GoldEntityRecord> next();
  std::size_t repairs() const { return repairs_; }

 private:
  LineReader lines_;
  std::size_t sentence_index_ = 0;
  std::size_t repairs_ = 0;
};

// Converts one sentence of BIO tag strings into entities; `repairs` is
// incremented once per promoted I-X.
std::vector<EntitySpan> entities_from_bio(const std::vector<std::string>& tags,
                                          std::size_t& repairs);

// Buffered line writer. Throws DataError if the path can't be opened.
class JsonlWriter {
 public:
  explicit JsonlWriter(const std::filesystem::path& path, bool append = false);

  void write_line(std::string_view line);
  void flush();

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

void write_nte_jsonl(const std::vector<NTEInstance>& instances,
                     const std::filesystem::path& path);

// Validation shared by readers and builders; throw DataError.
void validate(const GoldEntityRecord& record);
void validate(const GoldMRCRecord& record);

}  // namespace ntekit
