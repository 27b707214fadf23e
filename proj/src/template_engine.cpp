#include "ntekit/template_engine.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <set>

#include "json_fields.hpp"
#include "ntekit/text_core.hpp"

namespace ntekit {
namespace {

using namespace jsonl;

constexpr std::array<std::pair<TemplateKind, std::string_view>, 12> kKindNames{{
    {TemplateKind::entity, "entity"},
    {TemplateKind::relation_kill, "relation_kill"},
    {TemplateKind::relation_live, "relation_live"},
    {TemplateKind::relation_work, "relation_work"},
    {TemplateKind::relation_located, "relation_located"},
    {TemplateKind::relation_based, "relation_based"},
    {TemplateKind::relation_adverse, "relation_adverse"},
    {TemplateKind::query, "query"},
    {TemplateKind::instruction_entity, "instruction_entity"},
    {TemplateKind::instruction_query, "instruction_query"},
    {TemplateKind::rephrase_extract, "rephrase_extract"},
    {TemplateKind::rephrase_list, "rephrase_list"},
}};

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

struct Piece {
  bool placeholder = false;
  std::string text;
};

std::vector<Piece> split_pattern(std::string_view pattern) {
  std::vector<Piece> pieces;
  std::size_t pos = 0;
  while (pos < pattern.size()) {
    const std::size_t open = pattern.find('{', pos);
    if (open == std::string_view::npos) {
      pieces.push_back({false, std::string(pattern.substr(pos))});
      break;
    }
    const std::size_t close = pattern.find('}', open);
    if (close == std::string_view::npos) throw DataError("unterminated placeholder in template");
    if (open > pos) pieces.push_back({false, std::string(pattern.substr(pos, open - pos))});
    pieces.push_back({true, std::string(pattern.substr(open + 1, close - open - 1))});
    pos = close + 1;
  }
  return pieces;
}

const std::optional<std::string>* slot_value(const TemplateSlots& slots, std::string_view name) {
  if (name == "label") return &slots.label;
  if (name == "question") return &slots.question;
  if (name == "entity") return &slots.entity;
  if (name == "instruction") return &slots.instruction;
  return nullptr;
}

void append(std::vector<std::string>& out, std::vector<std::string> more) {
  out.insert(out.end(), std::make_move_iterator(more.begin()), std::make_move_iterator(more.end()));
}

}  // namespace

std::string_view to_string(TemplateKind kind) {
  for (const auto& [k, name] : kKindNames) {
    if (k == kind) return name;
  }
  return "entity";
}

TemplateKind parse_template_kind(std::string_view text) {
  for (const auto& [k, name] : kKindNames) {
    if (name == text) return k;
  }
  throw DataError("unknown template kind " + std::string(text));
}

bool is_entity_kind(TemplateKind kind) {
  switch (kind) {
    case TemplateKind::entity:
    case TemplateKind::instruction_entity:
    case TemplateKind::rephrase_extract:
    case TemplateKind::rephrase_list:
      return true;
    default:
      return false;
  }
}

TemplateLibrary TemplateLibrary::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open template file " + path.string());
  TemplateLibrary lib;
  std::optional<TaskTemplate> current;
  std::size_t line_number = 0;

  auto finish = [&]() {
    if (!current) return;
    if (current->pattern.empty()) {
      throw DataError("template " + std::string(to_string(current->kind)) + " has no pattern");
    }
    std::set<std::string> declared(current->slots.begin(), current->slots.end());
    for (const auto& piece : split_pattern(current->pattern)) {
      if (piece.placeholder && !declared.count(piece.text)) {
        throw DataError("template " + std::string(to_string(current->kind)) + ": placeholder {" +
                        piece.text + "} is not a declared slot");
      }
    }
    const TemplateKind kind = current->kind;
    lib.templates_[kind] = std::move(*current);
    current.reset();
  };

  std::string line;
  while (std::getline(in, line)) {
    ++line_number;
    std::string_view view = trim(line);
    if (view.empty() || view.front() == '#') continue;
    if (view.front() == '[') {
      if (view.back() != ']') throw DataError(at_line(line_number, "bad section header"));
      finish();
      const TemplateKind kind = parse_template_kind(view.substr(1, view.size() - 2));
      if (lib.templates_.count(kind)) {
        throw DataError(at_line(line_number, "duplicate template " + std::string(to_string(kind))));
      }
      current = TaskTemplate{kind, {}, {}};
      continue;
    }
    const std::size_t eq = view.find('=');
    if (eq == std::string_view::npos) throw DataError(at_line(line_number, "expected key = value"));
    const std::string_view key = trim(view.substr(0, eq));
    const std::string_view value = trim(view.substr(eq + 1));
    if (!current) {
      if (key != "version") throw DataError(at_line(line_number, "key outside a section"));
      lib.version_ = std::stoi(std::string(value));
    } else if (key == "pattern") {
      current->pattern = std::string(value);
    } else if (key == "slots") {
      for (const auto& slot : tokenize_words(value)) current->slots.push_back(slot);
    } else {
      throw DataError(at_line(line_number, "unknown key " + std::string(key)));
    }
  }
  finish();
  if (lib.version_ <= 0) throw DataError("template file " + path.string() + " lacks a version");
  return lib;
}

TemplateLibrary TemplateLibrary::builtin() {
  return load(std::filesystem::path(NTEKIT_DATA_DIR) / "templates.txt");
}

const TaskTemplate& TemplateLibrary::get(TemplateKind kind) const {
  auto it = templates_.find(kind);
  if (it == templates_.end()) {
    throw UsageError("no template for kind " + std::string(to_string(kind)));
  }
  return it->second;
}

RenderedInstance render(const TaskTemplate& tmpl, const TemplateSlots& slots) {
  for (const auto& name : tmpl.slots) {
    if (name == "context") continue;
    const auto* value = slot_value(slots, name);
    if (value == nullptr) throw DataError("template slot " + name + " is not supported");
    if (!value->has_value()) {
      throw DataError("missing slot " + name + " for template " + std::string(to_string(tmpl.kind)));
    }
  }

  RenderedInstance out;
  bool context_seen = false;
  for (const auto& piece : split_pattern(tmpl.pattern)) {
    if (!piece.placeholder) {
      append(out.prompt_tokens, tokenize_words(piece.text));
    } else if (piece.text == "context") {
      const std::size_t start = out.prompt_tokens.size();
      if (slots.context_tokens) {
        out.prompt_tokens.insert(out.prompt_tokens.end(), slots.context_tokens->begin(),
                                 slots.context_tokens->end());
      } else {
        append(out.prompt_tokens, tokenize_words(slots.context));
      }
      if (!context_seen) out.context_range = {start, out.prompt_tokens.size()};
      context_seen = true;
    } else {
      append(out.prompt_tokens, tokenize_words(**slot_value(slots, piece.text)));
    }
  }
  return out;
}

std::vector<Tag> align_gold_spans(const RenderedInstance& rendered,
                                  const std::vector<TokenRange>& spans) {
  std::vector<Tag> tags(rendered.prompt_tokens.size(), Tag::O);
  const std::size_t base = rendered.context_range.start;
  for (const auto& span : spans) {
    if (span.empty() || base + span.end > rendered.context_range.end) {
      throw DataError("gold span [" + std::to_string(span.start) + ", " + std::to_string(span.end) +
                      ") lies outside the context");
    }
    for (std::size_t i = span.start; i < span.end; ++i) {
      if (tags[base + i] != Tag::O) throw DataError("gold spans overlap");
      tags[base + i] = i == span.start ? Tag::B : Tag::I;
    }
  }
  return tags;
}

std::vector<Tag> align_gold_answers(const RenderedInstance& rendered,
                                    const std::vector<std::string>& answers) {
  std::vector<Tag> tags(rendered.prompt_tokens.size(), Tag::O);
  std::vector<std::vector<std::string>> needles;
  for (const auto& answer : answers) {
    auto toks = tokenize_words(answer);
    if (toks.empty()) throw DataError("empty gold answer");
    needles.push_back(std::move(toks));
  }
  std::stable_sort(needles.begin(), needles.end(),
                   [](const auto& a, const auto& b) { return a.size() > b.size(); });

  const auto& prompt = rendered.prompt_tokens;
  const TokenRange ctx = rendered.context_range;
  for (const auto& needle : needles) {
    bool found = false;
    for (std::size_t i = ctx.start; i + needle.size() <= ctx.end; ++i) {
      if (!std::equal(needle.begin(), needle.end(), prompt.begin() + i)) continue;
      found = true;
      const bool taken = std::any_of(tags.begin() + i, tags.begin() + i + needle.size(),
                                     [](Tag t) { return t != Tag::O; });
      if (taken) continue;
      tags[i] = Tag::B;
      std::fill(tags.begin() + i + 1, tags.begin() + i + needle.size(), Tag::I);
      i += needle.size() - 1;
    }
    if (!found) throw DataError("answer \"" + join_tokens(needle, 0, needle.size()) +
                                "\" does not occur in the context");
  }
  return tags;
}

RenderedInstance compose_in_context(const std::vector<Demonstration>& demos,
                                    const RenderedInstance& target, std::size_t limit,
                                    std::size_t max_tokens) {
  if (target.prompt_tokens.size() > max_tokens) {
    throw DataError("target prompt has " + std::to_string(target.prompt_tokens.size()) +
                    " tokens, over the limit of " + std::to_string(max_tokens));
  }
  std::vector<std::vector<std::string>> blocks;
  for (std::size_t i = 0; i < std::min(limit, demos.size()); ++i) {
    std::vector<std::string> block = demos[i].rendered.prompt_tokens;
    for (std::size_t a = 0; a < demos[i].answers.size(); ++a) {
      if (a > 0) block.emplace_back(",");
      append(block, tokenize_words(demos[i].answers[a]));
    }
    block.emplace_back(kDemoSeparator);
    blocks.push_back(std::move(block));
  }

  std::size_t total = target.prompt_tokens.size();
  for (const auto& b : blocks) total += b.size();
  std::size_t first = 0;
  while (total > max_tokens) total -= blocks[first++].size();

  RenderedInstance out;
  for (std::size_t i = first; i < blocks.size(); ++i) append(out.prompt_tokens, blocks[i]);
  const std::size_t offset = out.prompt_tokens.size();
  out.prompt_tokens.insert(out.prompt_tokens.end(), target.prompt_tokens.begin(),
                           target.prompt_tokens.end());
  out.context_range = {target.context_range.start + offset, target.context_range.end + offset};
  if (target.gold_tags) {
    std::vector<Tag> tags(offset, Tag::O);
    tags.insert(tags.end(), target.gold_tags->begin(), target.gold_tags->end());
    out.gold_tags = std::move(tags);
  }
  return out;
}

std::string to_jsonl(const RenderedRecord& record) {
  ordered obj;
  obj["id"] = record.id;
  obj["kind"] = std::string(to_string(record.kind));
  if (record.label) obj["label"] = *record.label;
  obj["prompt_tokens"] = record.instance.prompt_tokens;
  obj["context_range"] = {record.instance.context_range.start, record.instance.context_range.end};
  if (record.instance.gold_tags) {
    ordered tags = ordered::array();
    for (Tag t : *record.instance.gold_tags) tags.push_back(std::string(to_string(t)));
    obj["gold_tags"] = std::move(tags);
  }
  return dump(obj);
}

RenderedRecord parse_rendered_line(std::string_view line, std::size_t line_number) {
  json obj = parse_object(line, line_number);
  RenderedRecord rec;
  try {
    rec.id = string_field(obj, "id", line_number);
    rec.kind = parse_template_kind(string_field(obj, "kind", line_number));
    rec.label = optional_string(obj, "label", line_number);
    rec.instance.prompt_tokens = string_array(obj, "prompt_tokens", line_number);
    const json& range = array_field(obj, "context_range", line_number);
    if (range.size() != 2 || !range[0].is_number_unsigned() || !range[1].is_number_unsigned()) {
      throw DataError("context_range must be [start, end]");
    }
    rec.instance.context_range = {range[0].get<std::size_t>(), range[1].get<std::size_t>()};
    if (obj.contains("gold_tags") && !obj["gold_tags"].is_null()) {
      std::vector<Tag> tags;
      for (const auto& t : string_array(obj, "gold_tags", line_number)) tags.push_back(parse_tag(t));
      rec.instance.gold_tags = std::move(tags);
    }
  } catch (const DataError& e) {
    std::string what = e.what();
    if (what.rfind("line ", 0) == 0) throw;
    throw DataError(at_line(line_number, what));
  }
  const auto& inst = rec.instance;
  if (inst.context_range.start > inst.context_range.end ||
      inst.context_range.end > inst.prompt_tokens.size()) {
    throw DataError(at_line(line_number, "context_range out of bounds"));
  }
  if (inst.gold_tags && inst.gold_tags->size() != inst.prompt_tokens.size()) {
    throw DataError(at_line(line_number, "gold_tags and prompt_tokens differ in length"));
  }
  return rec;
}

}  // namespace ntekit
