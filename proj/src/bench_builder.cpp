#include "ntekit/bench_builder.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <json.hpp>
#include <map>
#include <thread>
#include <tuple>

#include "ntekit/text_core.hpp"

namespace ntekit {
namespace {

bool contains_run(const std::vector<std::string>& haystack, const std::vector<std::string>& needle) {
  if (needle.empty() || needle.size() > haystack.size()) return false;
  return std::search(haystack.begin(), haystack.end(), needle.begin(), needle.end()) !=
         haystack.end();
}

bool same_label(std::string_view a, std::string_view b) { return to_lower_ascii(a) == to_lower_ascii(b); }

using EntityKey = std::tuple<std::string, std::string, std::size_t, std::size_t>;

struct Outcome {
  std::string prompt;
  std::vector<std::string> replies;
  bool keep = true;
  std::vector<std::string> flags;
};

Outcome judge_entity(JudgeClient& judge, const std::string& prompt, int reply_retries) {
  Outcome out;
  out.prompt = prompt;
  for (int attempt = 0; attempt <= reply_retries; ++attempt) {
    out.replies.push_back(judge.ask(prompt));
    if (auto verdict = parse_judge_reply(out.replies.back())) {
      out.keep = *verdict;
      if (attempt > 0) out.flags.emplace_back("retried");
      return out;
    }
  }
  out.keep = true;
  out.flags.emplace_back("nonconforming_default_keep");
  return out;
}

}  // namespace

std::string_view to_string(PreferenceKind kind) {
  switch (kind) {
    case PreferenceKind::longest: return "longest";
    case PreferenceKind::shortest: return "shortest";
    case PreferenceKind::concise: return "concise";
  }
  return "concise";
}

PreferenceKind parse_preference(std::string_view text) {
  if (text == "longest") return PreferenceKind::longest;
  if (text == "shortest") return PreferenceKind::shortest;
  if (text == "concise") return PreferenceKind::concise;
  throw UsageError("unknown preference " + std::string(text) + " (longest, shortest, concise)");
}

PreferenceRule preference_rule(PreferenceKind kind) {
  switch (kind) {
    case PreferenceKind::longest: return {kind, "Give the longest answer"};
    case PreferenceKind::shortest: return {kind, "Give the shortest answer"};
    case PreferenceKind::concise: return {kind, "Give a concise answer"};
  }
  return {kind, "Give a concise answer"};
}

GoldMRCRecord apply_preference(const GoldMRCRecord& record, const PreferenceRule& rule) {
  if (record.answers.empty()) {
    throw DataError("record " + record.doc_id + " has no candidate answers");
  }
  if (rule.instruction_text.empty()) throw UsageError("preference rule lacks instruction text");

  std::vector<std::string> answers;
  std::vector<std::vector<std::string>> tokens;
  for (const auto& a : record.answers) {
    auto toks = tokenize_words(a);
    if (std::find(tokens.begin(), tokens.end(), toks) != tokens.end()) continue;
    answers.push_back(a);
    tokens.push_back(std::move(toks));
  }

  std::vector<std::size_t> keep;
  if (rule.kind == PreferenceKind::concise) {
    for (std::size_t a = 0; a < answers.size(); ++a) {
      bool padded = false;
      for (std::size_t b = 0; b < answers.size() && !padded; ++b) {
        padded = b != a && contains_run(tokens[a], tokens[b]);
      }
      if (!padded) keep.push_back(a);
    }
  } else {
    const bool longest = rule.kind == PreferenceKind::longest;
    auto key = [&](std::size_t i) { return std::make_pair(tokens[i].size(), answers[i].size()); };
    auto best = key(0);
    for (std::size_t i = 1; i < answers.size(); ++i) {
      best = longest ? std::max(best, key(i)) : std::min(best, key(i));
    }
    for (std::size_t i = 0; i < answers.size(); ++i) {
      if (key(i) == best) keep.push_back(i);
    }
  }

  GoldMRCRecord out = record;
  out.answers.clear();
  for (auto i : keep) out.answers.push_back(answers[i]);
  out.instruction = rule.instruction_text;
  return out;
}

MiscPreset misc_preset(std::string_view name) {
  if (name == "restaurant") {
    return {"restaurant", {"amenity", "hours", "price"},
            "Miscellaneous includes amenity, hours and price but not rating, dish, or location."};
  }
  if (name == "movie") {
    return {"movie", {"actor", "soundtrack", "quote"},
            "Miscellaneous includes actor, soundtrack and quote but not director, opinion, or plot."};
  }
  if (name == "conll") {
    return {"conll", {"MISC"},
            "Miscellaneous includes events, nationalities and products but not person, location or "
            "organization."};
  }
  throw UsageError("unknown miscellaneous preset " + std::string(name) +
                   " (restaurant, movie, conll)");
}

MiscResult build_miscellaneous(const std::vector<GoldEntityRecord>& records,
                               const std::vector<std::string>& merge_labels,
                               const std::string& instruction) {
  MiscResult result;
  std::vector<bool> seen(merge_labels.size(), false);
  result.records.reserve(records.size());
  for (const auto& rec : records) {
    GoldEntityRecord out = rec;
    for (auto& e : out.entities) {
      auto it = std::find_if(merge_labels.begin(), merge_labels.end(),
                             [&](const std::string& m) { return same_label(m, e.label); });
      if (it != merge_labels.end()) {
        seen[static_cast<std::size_t>(it - merge_labels.begin())] = true;
        e.label = std::string(kMiscLabel);
        e.scoring = true;
      } else {
        e.scoring = false;
      }
    }
    out.instruction = instruction;
    result.records.push_back(std::move(out));
  }
  for (std::size_t i = 0; i < merge_labels.size(); ++i) {
    if (!seen[i]) result.missing_labels.push_back(merge_labels[i]);
  }
  return result;
}

DisambiguationPreset disambiguation_preset(std::string_view name) {
  if (name == "conll") {
    return {"conll", "ORG",
            "The organization entity must be a subject of any active action in the context."};
  }
  if (name == "bionlp") {
    return {"bionlp", "protein",
            "The provided context must contain some descriptive information about the protein."};
  }
  if (name == "restaurant") {
    return {"restaurant", "rating",
            "The rating should describe a food or drink mentioned in the sentence."};
  }
  throw UsageError("unknown disambiguation preset " + std::string(name) +
                   " (conll, bionlp, restaurant)");
}

std::string judge_prompt(const std::string& instruction, const std::string& entity,
                         const std::string& context) {
  return instruction + " Does \"" + entity + "\" in \"" + context +
         "\" satisfy the definition above? Answer \"yes\" or \"no\" only.";
}

std::optional<bool> parse_judge_reply(std::string_view reply) {
  auto strip = [](char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '"' || c == '\'' || c == '.' ||
           c == '!';
  };
  while (!reply.empty() && strip(reply.front())) reply.remove_prefix(1);
  while (!reply.empty() && strip(reply.back())) reply.remove_suffix(1);
  const std::string word = to_lower_ascii(reply);
  if (word == "yes") return true;
  if (word == "no") return false;
  return std::nullopt;
}

std::vector<GoldEntityRecord> filter_disambiguation(const std::vector<GoldEntityRecord>& records,
                                                    const DisambiguationOptions& options,
                                                    JudgeClient& judge,
                                                    DisambiguationStats* stats) {
  if (options.audit_path.empty()) throw UsageError("disambiguation needs an audit path");
  DisambiguationStats local;
  DisambiguationStats& st = stats ? *stats : local;

  std::map<EntityKey, bool> previous;
  if (options.resume && std::filesystem::exists(options.audit_path)) {
    LineReader lines(options.audit_path);
    std::string line;
    while (lines.next(line)) {
      if (line.empty()) continue;
      auto obj = nlohmann::json::parse(line, nullptr, false);
      try {
        const auto& e = obj.at("entity");
        previous[{obj.at("id").get<std::string>(), e.at("label").get<std::string>(),
                  e.at("start").get<std::size_t>(), e.at("end").get<std::size_t>()}] =
            obj.at("decision").get<std::string>() == "keep";
      } catch (const nlohmann::json::exception&) {
        throw DataError(options.audit_path.string() + ": line " +
                        std::to_string(lines.line_number()) + ": malformed audit entry");
      }
    }
  }

  struct Task {
    std::size_t record = 0;
    std::size_t entity = 0;
    std::string prompt;
  };
  std::vector<Task> tasks;
  std::vector<std::vector<bool>> keep(records.size());
  for (std::size_t r = 0; r < records.size(); ++r) {
    const auto& rec = records[r];
    keep[r].assign(rec.entities.size(), true);
    const std::string context = join_tokens(rec.tokens, 0, rec.tokens.size());
    for (std::size_t e = 0; e < rec.entities.size(); ++e) {
      const auto& ent = rec.entities[e];
      if (!same_label(ent.label, options.target_label)) continue;
      auto hit = previous.find({rec.doc_id, ent.label, ent.start, ent.end});
      if (hit != previous.end()) {
        keep[r][e] = hit->second;
        ++st.reused;
        continue;
      }
      tasks.push_back({r, e,
                       judge_prompt(options.instruction, join_tokens(rec.tokens, ent.start, ent.end),
                                    context)});
    }
  }

  JsonlWriter audit = options.resume ? JsonlWriter(options.audit_path, /*append=*/true)
                                     : JsonlWriter(options.audit_path);
  const std::size_t workers = std::max<std::size_t>(1, options.concurrency);
  const std::size_t chunk = workers * 8;
  for (std::size_t begin = 0; begin < tasks.size(); begin += chunk) {
    const std::size_t end = std::min(tasks.size(), begin + chunk);
    std::vector<Outcome> outcomes(end - begin);
    std::vector<std::exception_ptr> errors(end - begin);
    std::atomic<std::size_t> next{begin};
    // Set on the first failure so no new calls start. Indices are claimed in
    // order, so every task before the failed one still completes.
    std::atomic<bool> failed{false};
    {
      std::vector<std::jthread> pool;
      for (std::size_t w = 0; w < std::min(workers, end - begin); ++w) {
        pool.emplace_back([&] {
          for (std::size_t i = next++; i < end && !failed; i = next++) {
            try {
              outcomes[i - begin] = judge_entity(judge, tasks[i].prompt, options.reply_retries);
            } catch (...) {
              errors[i - begin] = std::current_exception();
              failed = true;
            }
          }
        });
      }
    }
    for (std::size_t i = begin; i < end; ++i) {
      if (errors[i - begin]) {
        audit.flush();
        std::rethrow_exception(errors[i - begin]);
      }
      const Task& task = tasks[i];
      const Outcome& out = outcomes[i - begin];
      const auto& rec = records[task.record];
      const auto& ent = rec.entities[task.entity];
      nlohmann::ordered_json line;
      line["id"] = rec.doc_id;
      line["entity"] = {{"label", ent.label},
                        {"start", ent.start},
                        {"end", ent.end},
                        {"text", join_tokens(rec.tokens, ent.start, ent.end)}};
      line["prompt"] = out.prompt;
      line["replies"] = out.replies;
      line["decision"] = out.keep ? "keep" : "drop";
      line["flags"] = out.flags;
      audit.write_line(line.dump());
      keep[task.record][task.entity] = out.keep;
      ++st.judged;
      if (!out.flags.empty()) ++st.flagged;
    }
    audit.flush();
  }

  std::vector<GoldEntityRecord> result;
  result.reserve(records.size());
  for (std::size_t r = 0; r < records.size(); ++r) {
    GoldEntityRecord out = records[r];
    out.entities.clear();
    for (std::size_t e = 0; e < records[r].entities.size(); ++e) {
      const bool target = same_label(records[r].entities[e].label, options.target_label);
      if (keep[r][e]) {
        out.entities.push_back(records[r].entities[e]);
        if (target) ++st.kept;
      } else {
        ++st.dropped;
      }
    }
    out.instruction = options.instruction;
    result.push_back(std::move(out));
  }
  return result;
}

}  // namespace ntekit
