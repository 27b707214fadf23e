#pragma once

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "ntekit/corpus_io.hpp"
#include "ntekit/judge_client.hpp"

namespace ntekit {

enum class PreferenceKind { longest, shortest, concise };

std::string_view to_string(PreferenceKind kind);
PreferenceKind parse_preference(std::string_view text);

struct PreferenceRule {
  PreferenceKind kind = PreferenceKind::concise;
  std::string instruction_text;
};

// The SQuAD preference instructions.
PreferenceRule preference_rule(PreferenceKind kind);

// Filters the candidate answers. Lengths and containment are measured on
// word tokens. Exact duplicates collapse to their first occurrence.
// DataError on an empty candidate list.
GoldMRCRecord apply_preference(const GoldMRCRecord& record, const PreferenceRule& rule);

struct MiscPreset {
  std::string name;
  std::vector<std::string> merge_labels;
  std::string instruction;
};

inline constexpr std::string_view kMiscLabel = "miscellaneous";

// restaurant, movie, conll.
MiscPreset misc_preset(std::string_view name);

struct MiscResult {
  std::vector<GoldEntityRecord> records;
  // Merge labels that never occur in the input.
  std::vector<std::string> missing_labels;
};

// Relabels entities whose label is in `merge_labels` (case-insensitive) to
// "miscellaneous"; every other entity stays but stops scoring.
MiscResult build_miscellaneous(const std::vector<GoldEntityRecord>& records,
                               const std::vector<std::string>& merge_labels,
                               const std::string& instruction);

struct DisambiguationPreset {
  std::string name;
  std::string target_label;
  std::string instruction;
};

// conll, bionlp, restaurant.
DisambiguationPreset disambiguation_preset(std::string_view name);

std::string judge_prompt(const std::string& instruction, const std::string& entity,
                         const std::string& context);

// Lowercased reply with surrounding whitespace, quotes and final punctuation
// removed; "yes"/"no" or nullopt.
std::optional<bool> parse_judge_reply(std::string_view reply);

struct DisambiguationOptions {
  std::string target_label;  // matched case-insensitively
  std::string instruction;
  // Extra asks after a reply that is neither yes nor no.
  int reply_retries = 1;
  std::size_t concurrency = 4;
  std::filesystem::path audit_path;
  // Reuse decisions already in audit_path instead of asking again.
  bool resume = false;
};

struct DisambiguationStats {
  std::size_t judged = 0;
  std::size_t reused = 0;
  std::size_t kept = 0;
  std::size_t dropped = 0;
  std::size_t flagged = 0;
};

// Asks the judge about every target entity and drops the ones it rejects.
// Audit lines are appended in record order. If the judge becomes unreachable
// the audit holds every decision made before the failing one and the
// ServiceError propagates; rerun with `resume` to continue.
std::vector<GoldEntityRecord> filter_disambiguation(const std::vector<GoldEntityRecord>& records,
                                                    const DisambiguationOptions& options,
                                                    JudgeClient& judge,
                                                    DisambiguationStats* stats = nullptr);

}  // namespace ntekit
