#include "ntekit/corpus_io.hpp"

#include <algorithm>
#include <json.hpp>

#include "json_fields.hpp"

namespace ntekit {
namespace {

using namespace jsonl;
using jsonl::json;

// Splits a CoNLL line into whitespace-separated columns.
std::vector<std::string_view> columns(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

bool is_blank(std::string_view line) {
  return std::all_of(line.begin(), line.end(), [](char c) { return c == ' ' || c == '\t'; });
}

}  // namespace

LineReader::LineReader(const std::filesystem::path& path) : path_(path), in_(path) {
  if (!in_) throw DataError("cannot open " + path.string());
}

bool LineReader::next(std::string& line) {
  if (!std::getline(in_, line)) return false;
  ++line_number_;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return true;
}

RawTextRecord parse_raw_line(std::string_view line, std::size_t line_number) {
  json obj = parse_object(line, line_number);
  RawTextRecord record{string_field(obj, "id", line_number), string_field(obj, "text", line_number),
                       std::nullopt};
  if (record.doc_id.empty()) throw DataError(at_line(line_number, "empty id"));
  if (auto it = obj.find("spans"); it != obj.end()) {
    if (!it->is_array()) throw DataError(at_line(line_number, "field spans must be an array"));
    std::vector<TokenRange> spans;
    for (const auto& pair : *it) {
      if (!pair.is_array() || pair.size() != 2 || !pair[0].is_number_unsigned() ||
          !pair[1].is_number_unsigned()) {
        throw DataError(at_line(line_number, "field spans must hold [start, end] pairs"));
      }
      spans.push_back({pair[0].get<std::size_t>(), pair[1].get<std::size_t>()});
    }
    record.spans = std::move(spans);
  }
  return record;
}

std::optional<ChatRecord> parse_chat_line(std::string_view line, std::size_t line_number) {
  json obj = parse_object(line, line_number);
  ChatRecord record;
  record.doc_id = string_field(obj, "id", line_number);
  if (record.doc_id.empty()) throw DataError(at_line(line_number, "empty id"));
  bool has_user = false;
  bool has_assistant = false;
  for (const auto& turn : array_field(obj, "turns", line_number)) {
    if (!turn.is_object()) throw DataError(at_line(line_number, "turn must be an object"));
    ChatTurn parsed;
    std::string role = string_field(turn, "role", line_number);
    try {
      parsed.role = parse_role(role);
    } catch (const DataError& e) {
      throw DataError(at_line(line_number, e.what()));
    }
    parsed.text = string_field(turn, "text", line_number);
    has_user |= parsed.role == Role::user;
    has_assistant |= parsed.role == Role::assistant;
    record.turns.push_back(std::move(parsed));
  }
  if (!has_user || !has_assistant) return std::nullopt;
  return record;
}

GoldMRCRecord parse_mrc_line(std::string_view line, std::size_t line_number) {
  json obj = parse_object(line, line_number);
  GoldMRCRecord record;
  record.doc_id = string_field(obj, "id", line_number);
  record.context = string_field(obj, "context", line_number);
  record.question = string_field(obj, "question", line_number);
  record.answers = string_array(obj, "answers", line_number);
  record.instruction = optional_string(obj, "instruction", line_number);
  try {
    validate(record);
  } catch (const DataError& e) {
    throw DataError(at_line(line_number, e.what()));
  }
  return record;
}

GoldEntityRecord parse_entity_line(std::string_view line, std::size_t line_number) {
  json obj = parse_object(line, line_number);
  GoldEntityRecord record;
  record.doc_id = string_field(obj, "id", line_number);
  record.tokens = string_array(obj, "tokens", line_number);
  for (const auto& ent : array_field(obj, "entities", line_number)) {
    if (!ent.is_object()) throw DataError(at_line(line_number, "entity must be an object"));
    EntitySpan span;
    span.label = string_field(ent, "label", line_number);
    span.start = index_field(ent, "start", line_number);
    span.end = index_field(ent, "end", line_number);
    if (auto it = ent.find("scoring"); it != ent.end()) {
      if (!it->is_boolean()) throw DataError(at_line(line_number, "field scoring must be a bool"));
      span.scoring = it->get<bool>();
    }
    record.entities.push_back(std::move(span));
  }
  record.instruction = optional_string(obj, "instruction", line_number);
  try {
    validate(record);
  } catch (const DataError& e) {
    throw DataError(at_line(line_number, e.what()));
  }
  return record;
}

NTEInstance parse_nte_line(std::string_view line, std::size_t line_number) {
  json obj = parse_object(line, line_number);
  NTEInstance inst;
  try {
    inst.doc_id = string_field(obj, "doc_id", line_number);
    inst.stage = parse_stage(string_field(obj, "stage", line_number));
    inst.polarity = parse_polarity(string_field(obj, "polarity", line_number));
    inst.context_tokens = string_array(obj, "context_tokens", line_number);
    for (const auto& tag : string_array(obj, "tags", line_number)) inst.tags.push_back(parse_tag(tag));
    inst.target_tokens = string_array(obj, "target_tokens", line_number);
    for (const auto& trip : array_field(obj, "triplets", line_number)) {
      if (!trip.is_object()) throw DataError(at_line(line_number, "triplet must be an object"));
      inst.triplets.push_back(Triplet{index_field(trip, "t", line_number),
                                      index_field(trip, "k", line_number),
                                      index_field(trip, "n", line_number)});
    }
  } catch (const DataError& e) {
    std::string what = e.what();
    if (what.rfind("line ", 0) == 0) throw;
    throw DataError(at_line(line_number, what));
  }
  if (inst.tags.size() != inst.context_tokens.size()) {
    throw DataError(at_line(line_number, "tags and context_tokens differ in length"));
  }
  return inst;
}

std::string to_jsonl(const RawTextRecord& record) {
  ordered obj;
  obj["id"] = record.doc_id;
  obj["text"] = record.text;
  if (record.spans) {
    ordered spans = ordered::array();
    for (const auto& r : *record.spans) spans.push_back({r.start, r.end});
    obj["spans"] = std::move(spans);
  }
  return dump(obj);
}

std::string to_jsonl(const ChatRecord& record) {
  ordered obj;
  obj["id"] = record.doc_id;
  ordered turns = ordered::array();
  for (const auto& turn : record.turns) {
    ordered t;
    t["role"] = std::string(to_string(turn.role));
    t["text"] = turn.text;
    turns.push_back(std::move(t));
  }
  obj["turns"] = std::move(turns);
  return dump(obj);
}

std::string to_jsonl(const GoldMRCRecord& record) {
  ordered obj;
  obj["id"] = record.doc_id;
  obj["context"] = record.context;
  obj["question"] = record.question;
  obj["answers"] = record.answers;
  if (record.instruction) obj["instruction"] = *record.instruction;
  return dump(obj);
}

std::string to_jsonl(const GoldEntityRecord& record) {
  ordered obj;
  obj["id"] = record.doc_id;
  obj["tokens"] = record.tokens;
  ordered entities = ordered::array();
  for (const auto& ent : record.entities) {
    ordered e;
    e["label"] = ent.label;
    e["start"] = ent.start;
    e["end"] = ent.end;
    e["scoring"] = ent.scoring;
    entities.push_back(std::move(e));
  }
  obj["entities"] = std::move(entities);
  if (record.instruction) obj["instruction"] = *record.instruction;
  return dump(obj);
}

std::string to_jsonl(const NTEInstance& inst) {
  ordered obj;
  obj["doc_id"] = inst.doc_id;
  obj["stage"] = std::string(to_string(inst.stage));
  obj["polarity"] = std::string(to_string(inst.polarity));
  obj["context_tokens"] = inst.context_tokens;
  ordered tags = ordered::array();
  for (Tag tag : inst.tags) tags.push_back(std::string(to_string(tag)));
  obj["tags"] = std::move(tags);
  obj["target_tokens"] = inst.target_tokens;
  ordered triplets = ordered::array();
  for (const auto& trip : inst.triplets) {
    ordered t;
    t["t"] = trip.t;
    t["k"] = trip.k;
    t["n"] = trip.n;
    triplets.push_back(std::move(t));
  }
  obj["triplets"] = std::move(triplets);
  return dump(obj);
}

std::string to_conll(const GoldEntityRecord& record) {
  std::vector<std::string> tags(record.tokens.size(), "O");
  for (const auto& ent : record.entities) {
    for (std::size_t i = ent.start; i < ent.end && i < tags.size(); ++i) {
      tags[i] = (i == ent.start ? "B-" : "I-") + ent.label;
    }
  }
  std::string out;
  for (std::size_t i = 0; i < record.tokens.size(); ++i) {
    out += record.tokens[i];
    out += ' ';
    out += tags[i];
    out += '\n';
  }
  out += '\n';
  return out;
}

std::optional<ChatRecord> ChatJsonlReader::next() {
  std::string line;
  while (lines_.next(line)) {
    if (line.empty()) continue;
    auto record = parse_chat_line(line, lines_.line_number());
    if (!record) {
      ++skipped_;
      continue;
    }
    return record;
  }
  return std::nullopt;
}

std::vector<EntitySpan> entities_from_bio(const std::vector<std::string>& tags,
                                          std::size_t& repairs) {
  std::vector<EntitySpan> out;
  std::string open_label;
  bool open = false;
  for (std::size_t i = 0; i < tags.size(); ++i) {
    const std::string& tag = tags[i];
    if (tag == "O" || tag.empty()) {
      open = false;
      continue;
    }
    if (tag.size() < 2 || (tag[0] != 'B' && tag[0] != 'I') || tag[1] != '-') {
      throw DataError("bad BIO tag " + tag);
    }
    std::string label = tag.substr(2);
    bool continues = tag[0] == 'I' && open && open_label == label;
    if (continues) {
      out.back().end = i + 1;
      continue;
    }
    if (tag[0] == 'I') ++repairs;
    out.push_back(EntitySpan{label, i, i + 1, true});
    open_label = std::move(label);
    open = true;
  }
  return out;
}

std::optional<GoldEntityRecord> ConllReader::next() {
  std::string line;
  GoldEntityRecord record;
  std::vector<std::string> tags;
  std::size_t first_line = 0;
  auto finish = [&]() {
    record.doc_id = std::to_string(sentence_index_++);
    try {
      record.entities = entities_from_bio(tags, repairs_);
    } catch (const DataError& e) {
      throw DataError(at_line(first_line, e.what()));
    }
    return record;
  };
  while (lines_.next(line)) {
    if (is_blank(line)) {
      if (!record.tokens.empty()) return finish();
      continue;
    }
    auto cols = columns(line);
    if (cols.front().starts_with("-DOCSTART-")) continue;
    if (cols.size() < 2) {
      throw DataError(at_line(lines_.line_number(), "expected token and tag columns"));
    }
    if (record.tokens.empty()) first_line = lines_.line_number();
    record.tokens.emplace_back(cols.front());
    tags.emplace_back(cols.back());
  }
  if (!record.tokens.empty()) return finish();
  return std::nullopt;
}

JsonlWriter::JsonlWriter(const std::filesystem::path& path, bool append)
    : path_(path), out_(path, std::ios::binary | (append ? std::ios::app : std::ios::trunc)) {
  if (!out_) throw DataError("cannot write " + path.string());
}

void JsonlWriter::write_line(std::string_view line) {
  out_.write(line.data(), static_cast<std::streamsize>(line.size()));
  out_.put('\n');
  if (!out_) throw DataError("write failed on " + path_.string());
}

void JsonlWriter::flush() {
  out_.flush();
  if (!out_) throw DataError("write failed on " + path_.string());
}

void write_nte_jsonl(const std::vector<NTEInstance>& instances,
                     const std::filesystem::path& path) {
  JsonlWriter writer(path);
  for (const auto& inst : instances) writer.write_line(to_jsonl(inst));
  writer.flush();
}

void validate(const GoldEntityRecord& record) {
  for (const auto& ent : record.entities) {
    if (ent.start >= ent.end || ent.end > record.tokens.size()) {
      throw DataError("entity " + ent.label + " [" + std::to_string(ent.start) + "," +
                      std::to_string(ent.end) + ") out of range in " + record.doc_id);
    }
  }
  for (std::size_t a = 0; a < record.entities.size(); ++a) {
    for (std::size_t b = a + 1; b < record.entities.size(); ++b) {
      const auto& x = record.entities[a];
      const auto& y = record.entities[b];
      if (x.label == y.label && x.start < y.end && y.start < x.end) {
        throw DataError("overlapping " + x.label + " entities in " + record.doc_id);
      }
    }
  }
}

void validate(const GoldMRCRecord& record) {
  for (const auto& answer : record.answers) {
    if (answer.empty() || record.context.find(answer) == std::string::npos) {
      throw DataError("answer \"" + answer + "\" not found in context of " + record.doc_id);
    }
  }
}

}  // namespace ntekit
