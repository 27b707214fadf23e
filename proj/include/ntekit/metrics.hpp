#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "ntekit/corpus_io.hpp"
#include "ntekit/template_engine.hpp"

namespace ntekit {

struct Extraction {
  TokenRange range;
  std::string text;
  bool operator==(const Extraction&) const = default;
};

struct DecodeResult {
  std::vector<Extraction> extractions;
  // Runs that opened with an I.
  std::size_t repairs = 0;
};

// Maximal B(I)* runs inside context_range. An I that does not continue a run
// opens one. DataError when the lengths differ.
DecodeResult decode_bio(const std::vector<Tag>& tags, const std::vector<std::string>& prompt_tokens,
                        const TokenRange& context_range);

struct PredictedSpan {
  std::optional<std::string> label;
  std::optional<std::size_t> start;
  std::optional<std::size_t> end;
  std::optional<std::string> text;
  bool operator==(const PredictedSpan&) const = default;
};

// One line of preds.jsonl. Entity offsets are context-token offsets.
struct Prediction {
  std::string doc_id;
  std::string task;
  std::vector<PredictedSpan> spans;
  bool abstain = false;
  bool operator==(const Prediction&) const = default;
};

std::string to_jsonl(const Prediction& prediction);
Prediction parse_prediction_line(std::string_view line, std::size_t line_number);
std::vector<Prediction> read_predictions(const std::filesystem::path& path);

// Decodes tags over a rendered prompt into a prediction. Entity kinds carry
// the record label and context offsets; other kinds carry answer text.
Prediction prediction_from_tags(const RenderedRecord& record, const std::vector<Tag>& tags,
                                std::size_t* repairs = nullptr);

struct LabelScore {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  bool operator==(const LabelScore&) const = default;
};

struct ScoreReport {
  std::string metric;
  // Headline value: micro F1, mean word F1, AnsSim or DualEM.
  double score = 0.0;
  double micro_precision = 0.0;
  double micro_recall = 0.0;
  double micro_f1 = 0.0;
  double word_f1_mean = 0.0;
  std::map<std::string, LabelScore> per_label;
  std::size_t n_items = 0;
  // Pairs left out of AnsSim because a side abstained.
  std::size_t skipped = 0;
  bool operator==(const ScoreReport&) const = default;
};

double f1_from(double precision, double recall);

// Labeled-span micro F1 with multiset matching. Only scoring gold entities
// count; when some gold entities are non-scoring, predictions are limited to
// the labels that do score. A non-empty `only_labels` further limits both
// sides to those labels. A prediction for an unknown doc_id is a DataError.
ScoreReport entity_micro_f1(const std::vector<GoldEntityRecord>& golds,
                            const std::vector<Prediction>& preds,
                            const std::set<std::string>& only_labels = {});

// Bag-of-words F1 over lowercase word tokens.
double word_f1(std::string_view prediction, std::string_view gold);

// Most frequent extracted answer, ties to the earliest; nullopt = abstain.
std::optional<std::string> resolve_answer(const Prediction& prediction);

// Mean over items of the max word F1 against any gold. Unanswerable items
// score 1 for an abstention and 0 otherwise. Items without a prediction
// abstain.
ScoreReport mrc_word_f1(const std::vector<GoldMRCRecord>& golds,
                        const std::vector<Prediction>& preds);

using AnswerMap = std::map<std::string, std::optional<std::string>>;

AnswerMap answers_by_id(const std::vector<Prediction>& preds);

// Mean word F1 between paired answers. Unpaired ids are a DataError; pairs
// where either side abstains are skipped and counted.
ScoreReport ans_sim(const AnswerMap& a, const AnswerMap& b);

// Normalized exact match: equal lowercase word-token sequences.
bool answers_match(std::string_view a, std::string_view b);

// Fraction of items answered exactly under both instructions.
ScoreReport dual_em(const AnswerMap& preds_long, const AnswerMap& preds_short,
                    const std::vector<GoldMRCRecord>& golds_long,
                    const std::vector<GoldMRCRecord>& golds_short);

enum class ScoreFormat { human, machine };
std::string render_score(const ScoreReport& report, ScoreFormat format);

}  // namespace ntekit
