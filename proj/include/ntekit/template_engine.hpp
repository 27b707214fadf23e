#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ntekit/common.hpp"

namespace ntekit {

enum class TemplateKind {
  entity,
  relation_kill,
  relation_live,
  relation_work,
  relation_located,
  relation_based,
  relation_adverse,
  query,
  instruction_entity,
  instruction_query,
  rephrase_extract,
  rephrase_list,
};

std::string_view to_string(TemplateKind kind);
TemplateKind parse_template_kind(std::string_view text);
// Kinds whose predictions are labeled entity spans (the rest yield answers).
bool is_entity_kind(TemplateKind kind);

struct TaskTemplate {
  TemplateKind kind = TemplateKind::entity;
  std::string pattern;
  std::vector<std::string> slots;
};

class TemplateLibrary {
 public:
  // Sectioned plain-text file:
  //   version = 1
  //   [entity]
  //   pattern = User: {context} Question: ...
  //   slots = context label
  static TemplateLibrary load(const std::filesystem::path& path);
  // The templates shipped in the data directory.
  static TemplateLibrary builtin();

  const TaskTemplate& get(TemplateKind kind) const;
  bool has(TemplateKind kind) const { return templates_.count(kind) != 0; }
  int version() const { return version_; }

 private:
  int version_ = 0;
  std::map<TemplateKind, TaskTemplate> templates_;
};

struct TemplateSlots {
  std::string context;
  // Pre-tokenized context; takes precedence over `context` so entity spans
  // keep their token offsets.
  std::optional<std::vector<std::string>> context_tokens;
  std::optional<std::string> label;
  std::optional<std::string> question;
  std::optional<std::string> entity;
  std::optional<std::string> instruction;
};

struct RenderedInstance {
  std::vector<std::string> prompt_tokens;
  TokenRange context_range;
  std::optional<std::vector<Tag>> gold_tags;
  bool operator==(const RenderedInstance&) const = default;
};

// Substitutes the slots and tokenizes each literal piece and slot value
// separately. DataError names the first missing slot.
RenderedInstance render(const TaskTemplate& tmpl, const TemplateSlots& slots);

// Span gold: ranges are offsets into the context tokens.
std::vector<Tag> align_gold_spans(const RenderedInstance& rendered,
                                  const std::vector<TokenRange>& spans);
// String gold: every occurrence of every answer inside the context, longer
// answers first, never overlapping an earlier tagged run. DataError if an
// answer does not occur.
std::vector<Tag> align_gold_answers(const RenderedInstance& rendered,
                                    const std::vector<std::string>& answers);

inline constexpr std::size_t kMaxPromptTokens = 512;
inline constexpr std::string_view kDemoSeparator = "\n\n";

struct Demonstration {
  RenderedInstance rendered;
  std::vector<std::string> answers;
};

// Demo blocks are the demo prompt followed by its answers (comma separated),
// each block followed by a separator token, then the target. Uses the first
// `limit` demos and drops the earliest until the total fits `max_tokens`.
RenderedInstance compose_in_context(const std::vector<Demonstration>& demos,
                                    const RenderedInstance& target, std::size_t limit,
                                    std::size_t max_tokens = kMaxPromptTokens);

// One line of rendered.jsonl.
struct RenderedRecord {
  std::string id;
  TemplateKind kind = TemplateKind::entity;
  std::optional<std::string> label;
  RenderedInstance instance;
  bool operator==(const RenderedRecord&) const = default;
};

std::string to_jsonl(const RenderedRecord& record);
RenderedRecord parse_rendered_line(std::string_view line, std::size_t line_number);

}  // namespace ntekit
