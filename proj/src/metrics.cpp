#include "ntekit/metrics.hpp"

#include <algorithm>
#include <iomanip>
#include <set>
#include <sstream>
#include <tuple>
#include <unordered_map>

#include "json_fields.hpp"
#include "ntekit/text_core.hpp"

namespace ntekit {
namespace {

using namespace jsonl;

double safe_div(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

std::vector<std::string> word_bag(std::string_view text) {
  std::vector<std::string> words = tokenize_words(text);
  for (auto& w : words) w = to_lower_ascii(w);
  return words;
}

LabelScore finish_counts(std::size_t tp, std::size_t fp, std::size_t fn) {
  LabelScore s{tp, fp, fn, 0.0, 0.0, 0.0};
  s.precision = safe_div(static_cast<double>(tp), static_cast<double>(tp + fp));
  s.recall = safe_div(static_cast<double>(tp), static_cast<double>(tp + fn));
  s.f1 = f1_from(s.precision, s.recall);
  return s;
}

template <typename MapA, typename MapB>
void require_same_ids(const MapA& a, const MapB& b, std::string_view what) {
  for (const auto& [id, _] : a) {
    if (!b.count(id)) throw DataError(std::string(what) + ": item " + id + " is unpaired");
  }
  for (const auto& [id, _] : b) {
    if (!a.count(id)) throw DataError(std::string(what) + ": item " + id + " is unpaired");
  }
}

}  // namespace

DecodeResult decode_bio(const std::vector<Tag>& tags, const std::vector<std::string>& prompt_tokens,
                        const TokenRange& context_range) {
  if (tags.size() != prompt_tokens.size()) {
    throw DataError("tags and tokens differ in length (" + std::to_string(tags.size()) + " vs " +
                    std::to_string(prompt_tokens.size()) + ")");
  }
  DecodeResult out;
  const std::size_t end = std::min(context_range.end, tags.size());
  std::size_t i = context_range.start;
  while (i < end) {
    if (tags[i] == Tag::O) {
      ++i;
      continue;
    }
    if (tags[i] == Tag::I) ++out.repairs;
    std::size_t j = i + 1;
    while (j < end && tags[j] == Tag::I) ++j;
    out.extractions.push_back({{i, j}, join_tokens(prompt_tokens, i, j)});
    i = j;
  }
  return out;
}

std::string to_jsonl(const Prediction& p) {
  ordered obj;
  obj["id"] = p.doc_id;
  obj["task"] = p.task;
  ordered spans = ordered::array();
  for (const auto& s : p.spans) {
    ordered span = ordered::object();
    if (s.label) span["label"] = *s.label;
    if (s.start) span["start"] = *s.start;
    if (s.end) span["end"] = *s.end;
    if (s.text) span["text"] = *s.text;
    spans.push_back(std::move(span));
  }
  obj["spans"] = std::move(spans);
  obj["abstain"] = p.abstain;
  return dump(obj);
}

Prediction parse_prediction_line(std::string_view line, std::size_t line_number) {
  json obj = parse_object(line, line_number);
  Prediction p;
  try {
    p.doc_id = string_field(obj, "id", line_number);
    p.task = string_field(obj, "task", line_number);
    for (const auto& item : array_field(obj, "spans", line_number)) {
      if (!item.is_object()) throw DataError("span must be an object");
      PredictedSpan s;
      s.label = optional_string(item, "label", line_number);
      s.text = optional_string(item, "text", line_number);
      if (item.contains("start")) s.start = index_field(item, "start", line_number);
      if (item.contains("end")) s.end = index_field(item, "end", line_number);
      if (s.start.has_value() != s.end.has_value()) throw DataError("span needs both start and end");
      if (s.start && *s.end <= *s.start) throw DataError("span end must exceed start");
      if (!s.start && !s.text) throw DataError("span needs offsets or text");
      p.spans.push_back(std::move(s));
    }
    const json& abstain = field(obj, "abstain", line_number);
    if (!abstain.is_boolean()) throw DataError("field abstain must be a boolean");
    p.abstain = abstain.get<bool>();
  } catch (const DataError& e) {
    std::string what = e.what();
    if (what.rfind("line ", 0) == 0) throw;
    throw DataError(at_line(line_number, what));
  }
  if (p.abstain && !p.spans.empty()) {
    throw DataError(at_line(line_number, "abstaining prediction carries spans"));
  }
  return p;
}

std::vector<Prediction> read_predictions(const std::filesystem::path& path) {
  JsonlStream<Prediction, parse_prediction_line> stream(path);
  std::vector<Prediction> out;
  while (auto p = stream.next()) out.push_back(std::move(*p));
  return out;
}

Prediction prediction_from_tags(const RenderedRecord& record, const std::vector<Tag>& tags,
                                std::size_t* repairs) {
  const auto& inst = record.instance;
  DecodeResult decoded = decode_bio(tags, inst.prompt_tokens, inst.context_range);
  if (repairs) *repairs += decoded.repairs;
  Prediction p;
  p.doc_id = record.id;
  p.task = std::string(to_string(record.kind));
  const bool entity = is_entity_kind(record.kind);
  for (auto& ex : decoded.extractions) {
    PredictedSpan s;
    if (entity) {
      s.label = record.label;
      s.start = ex.range.start - inst.context_range.start;
      s.end = ex.range.end - inst.context_range.start;
    }
    s.text = std::move(ex.text);
    p.spans.push_back(std::move(s));
  }
  p.abstain = p.spans.empty();
  return p;
}

double f1_from(double precision, double recall) {
  return precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
}

ScoreReport entity_micro_f1(const std::vector<GoldEntityRecord>& golds,
                            const std::vector<Prediction>& preds,
                            const std::set<std::string>& only_labels) {
  auto wanted = [&](const std::string& label) {
    return only_labels.empty() || only_labels.count(label) != 0;
  };
  using Key = std::tuple<std::string, std::size_t, std::size_t>;
  std::unordered_map<std::string, std::size_t> index;
  std::set<std::string> scoring_labels;
  bool restricted = false;
  for (std::size_t i = 0; i < golds.size(); ++i) {
    if (!index.emplace(golds[i].doc_id, i).second) {
      throw DataError("duplicate gold id " + golds[i].doc_id);
    }
    for (const auto& e : golds[i].entities) {
      if (e.scoring) {
        scoring_labels.insert(e.label);
      } else {
        restricted = true;
      }
    }
  }

  std::vector<std::multiset<Key>> predicted(golds.size());
  for (const auto& p : preds) {
    auto it = index.find(p.doc_id);
    if (it == index.end()) throw DataError("prediction for unknown id " + p.doc_id);
    for (const auto& s : p.spans) {
      if (!s.label || !s.start || !s.end) {
        throw DataError("entity prediction for " + p.doc_id + " lacks label or offsets");
      }
      if (restricted && !scoring_labels.count(*s.label)) continue;
      if (!wanted(*s.label)) continue;
      predicted[it->second].insert({*s.label, *s.start, *s.end});
    }
  }

  std::map<std::string, LabelScore> counts;
  for (std::size_t i = 0; i < golds.size(); ++i) {
    std::multiset<Key> remaining = predicted[i];
    for (const auto& e : golds[i].entities) {
      if (!e.scoring || !wanted(e.label)) continue;
      auto hit = remaining.find({e.label, e.start, e.end});
      if (hit != remaining.end()) {
        ++counts[e.label].tp;
        remaining.erase(hit);
      } else {
        ++counts[e.label].fn;
      }
    }
    for (const auto& key : remaining) ++counts[std::get<0>(key)].fp;
  }

  ScoreReport report;
  report.metric = "entity_micro_f1";
  report.n_items = golds.size();
  std::size_t tp = 0, fp = 0, fn = 0;
  for (const auto& [label, c] : counts) {
    report.per_label[label] = finish_counts(c.tp, c.fp, c.fn);
    tp += c.tp;
    fp += c.fp;
    fn += c.fn;
  }
  const LabelScore total = finish_counts(tp, fp, fn);
  report.micro_precision = total.precision;
  report.micro_recall = total.recall;
  report.micro_f1 = total.f1;
  report.score = total.f1;
  return report;
}

double word_f1(std::string_view prediction, std::string_view gold) {
  std::vector<std::string> p = word_bag(prediction);
  std::vector<std::string> g = word_bag(gold);
  if (p.empty() || g.empty()) return p.empty() && g.empty() ? 1.0 : 0.0;
  std::unordered_map<std::string, long> bag;
  for (const auto& w : g) ++bag[w];
  std::size_t overlap = 0;
  for (const auto& w : p) {
    auto it = bag.find(w);
    if (it != bag.end() && it->second > 0) {
      --it->second;
      ++overlap;
    }
  }
  if (overlap == 0) return 0.0;
  const double precision = static_cast<double>(overlap) / static_cast<double>(p.size());
  const double recall = static_cast<double>(overlap) / static_cast<double>(g.size());
  return f1_from(precision, recall);
}

std::optional<std::string> resolve_answer(const Prediction& prediction) {
  if (prediction.abstain) return std::nullopt;
  std::vector<std::string> texts;
  for (const auto& s : prediction.spans) {
    if (!s.text) continue;
    const auto toks = tokenize_words(*s.text);
    if (!toks.empty()) texts.push_back(join_tokens(toks, 0, toks.size()));
  }
  if (texts.empty()) return std::nullopt;
  std::size_t best = 0;
  std::size_t best_count = 0;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    const auto count = static_cast<std::size_t>(std::count(texts.begin(), texts.end(), texts[i]));
    if (count > best_count) {
      best = i;
      best_count = count;
    }
  }
  return texts[best];
}

AnswerMap answers_by_id(const std::vector<Prediction>& preds) {
  std::map<std::string, Prediction> merged;
  for (const auto& p : preds) {
    auto [it, inserted] = merged.emplace(p.doc_id, p);
    if (!inserted) {
      it->second.spans.insert(it->second.spans.end(), p.spans.begin(), p.spans.end());
      it->second.abstain = it->second.spans.empty();
    }
  }
  AnswerMap out;
  for (const auto& [id, p] : merged) out[id] = resolve_answer(p);
  return out;
}

ScoreReport mrc_word_f1(const std::vector<GoldMRCRecord>& golds,
                        const std::vector<Prediction>& preds) {
  AnswerMap answers = answers_by_id(preds);
  std::set<std::string> gold_ids;
  for (const auto& g : golds) gold_ids.insert(g.doc_id);
  for (const auto& [id, _] : answers) {
    if (!gold_ids.count(id)) throw DataError("prediction for unknown id " + id);
  }
  double sum = 0.0;
  for (const auto& g : golds) {
    auto it = answers.find(g.doc_id);
    const std::optional<std::string> answer = it == answers.end() ? std::nullopt : it->second;
    double item = 0.0;
    if (g.answers.empty()) {
      item = answer ? 0.0 : 1.0;
    } else if (answer) {
      for (const auto& gold : g.answers) item = std::max(item, word_f1(*answer, gold));
    }
    sum += item;
  }
  ScoreReport report;
  report.metric = "mrc_word_f1";
  report.n_items = golds.size();
  report.word_f1_mean = safe_div(sum, static_cast<double>(golds.size()));
  report.score = report.word_f1_mean;
  return report;
}

ScoreReport ans_sim(const AnswerMap& a, const AnswerMap& b) {
  require_same_ids(a, b, "AnsSim");
  ScoreReport report;
  report.metric = "ans_sim";
  double sum = 0.0;
  for (const auto& [id, answer] : a) {
    const auto& other = b.at(id);
    if (!answer || !other) {
      ++report.skipped;
      continue;
    }
    sum += word_f1(*answer, *other);
    ++report.n_items;
  }
  report.score = safe_div(sum, static_cast<double>(report.n_items));
  report.word_f1_mean = report.score;
  return report;
}

bool answers_match(std::string_view a, std::string_view b) { return word_bag(a) == word_bag(b); }

ScoreReport dual_em(const AnswerMap& preds_long, const AnswerMap& preds_short,
                    const std::vector<GoldMRCRecord>& golds_long,
                    const std::vector<GoldMRCRecord>& golds_short) {
  std::map<std::string, const GoldMRCRecord*> gl, gs;
  for (const auto& g : golds_long) gl[g.doc_id] = &g;
  for (const auto& g : golds_short) gs[g.doc_id] = &g;
  if (gl.size() != golds_long.size() || gs.size() != golds_short.size()) {
    throw DataError("DualEM: duplicate gold ids");
  }
  require_same_ids(gl, gs, "DualEM golds");
  require_same_ids(gl, preds_long, "DualEM long predictions");
  require_same_ids(gl, preds_short, "DualEM short predictions");

  auto correct = [](const std::optional<std::string>& answer, const GoldMRCRecord& gold) {
    if (gold.answers.empty()) return !answer.has_value();
    if (!answer) return false;
    return std::any_of(gold.answers.begin(), gold.answers.end(),
                       [&](const std::string& g) { return answers_match(*answer, g); });
  };

  ScoreReport report;
  report.metric = "dual_em";
  std::size_t hits = 0;
  for (const auto& [id, gold] : gl) {
    ++report.n_items;
    if (correct(preds_long.at(id), *gold) && correct(preds_short.at(id), *gs.at(id))) ++hits;
  }
  report.score = safe_div(static_cast<double>(hits), static_cast<double>(report.n_items));
  return report;
}

std::string render_score(const ScoreReport& r, ScoreFormat format) {
  if (format == ScoreFormat::machine) {
    ordered obj;
    obj["metric"] = r.metric;
    obj["score"] = r.score;
    obj["micro_precision"] = r.micro_precision;
    obj["micro_recall"] = r.micro_recall;
    obj["micro_f1"] = r.micro_f1;
    obj["word_f1_mean"] = r.word_f1_mean;
    ordered labels = ordered::object();
    for (const auto& [label, s] : r.per_label) {
      labels[label] = {{"tp", s.tp},     {"fp", s.fp},         {"fn", s.fn},
                       {"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1}};
    }
    obj["per_label"] = std::move(labels);
    obj["n_items"] = r.n_items;
    obj["skipped"] = r.skipped;
    return dump(obj);
  }
  std::ostringstream os;
  os << std::fixed << std::setprecision(4);
  os << r.metric << ": " << r.score << " over " << r.n_items << " items";
  if (r.skipped) os << " (" << r.skipped << " skipped)";
  os << "\n";
  if (r.metric == "entity_micro_f1") {
    os << "  " << std::left << std::setw(20) << "label" << std::right << std::setw(7) << "tp"
       << std::setw(7) << "fp" << std::setw(7) << "fn" << std::setw(10) << "P" << std::setw(10)
       << "R" << std::setw(10) << "F1" << "\n";
    auto line = [&](const std::string& name, const LabelScore& s) {
      os << "  " << std::left << std::setw(20) << name << std::right << std::setw(7) << s.tp
         << std::setw(7) << s.fp << std::setw(7) << s.fn << std::setw(10) << s.precision
         << std::setw(10) << s.recall << std::setw(10) << s.f1 << "\n";
    };
    LabelScore total;
    for (const auto& [label, s] : r.per_label) {
      line(label, s);
      total.tp += s.tp;
      total.fp += s.fp;
      total.fn += s.fn;
    }
    total.precision = r.micro_precision;
    total.recall = r.micro_recall;
    total.f1 = r.micro_f1;
    line("micro", total);
  }
  return os.str();
}

}  // namespace ntekit
