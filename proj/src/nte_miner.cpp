#include "ntekit/nte_miner.hpp"

#include <algorithm>
#include <json.hpp>
#include <random>
#include <string_view>
#include <thread>
#include <unordered_map>

namespace ntekit {
namespace {

constexpr std::uint64_t kHashMod = (std::uint64_t{1} << 61) - 1;
constexpr std::uint64_t kHashBase = 1'000'003;

std::uint64_t mul_mod(std::uint64_t a, std::uint64_t b) {
  auto product = static_cast<unsigned __int128>(a) * b;
  std::uint64_t lo = static_cast<std::uint64_t>(product & kHashMod);
  std::uint64_t hi = static_cast<std::uint64_t>(product >> 61);
  std::uint64_t sum = lo + hi;
  return sum >= kHashMod ? sum - kHashMod : sum;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Uniform in [0, 1) from the top 53 bits; identical on every platform,
// unlike std::uniform_real_distribution.
double unit_draw(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Interned token ids plus polynomial prefix hashes for O(1) span comparison.
class TokenIndex {
 public:
  explicit TokenIndex(const Document& doc) {
    const std::size_t n = doc.size();
    ids_.resize(n);
    std::unordered_map<std::string_view, std::uint32_t> interned;
    interned.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      auto [it, inserted] =
          interned.try_emplace(doc.tokens[i], static_cast<std::uint32_t>(interned.size()));
      ids_[i] = it->second;
    }
    // Markup positions get ids no content token can share.
    std::uint32_t next_unique = static_cast<std::uint32_t>(interned.size());
    for (const auto& m : doc.markup) {
      for (std::size_t i = m.start; i < m.end && i < n; ++i) ids_[i] = next_unique++;
    }
    positions_.resize(next_unique);
    for (std::size_t i = 0; i < n; ++i) positions_[ids_[i]].push_back(static_cast<std::uint32_t>(i));
    prefix_.resize(n + 1);
    power_.resize(n + 1);
    power_[0] = 1;
    for (std::size_t i = 0; i < n; ++i) {
      prefix_[i + 1] = (mul_mod(prefix_[i], kHashBase) + ids_[i] + 1) % kHashMod;
      power_[i + 1] = mul_mod(power_[i], kHashBase);
    }
  }

  std::uint64_t hash(std::size_t start, std::size_t len) const {
    std::uint64_t sub = mul_mod(prefix_[start], power_[len]);
    std::uint64_t h = prefix_[start + len];
    return h >= sub ? h - sub : h + kHashMod - sub;
  }

  bool equal(std::size_t a, std::size_t b, std::size_t len) const {
    return std::equal(ids_.begin() + static_cast<std::ptrdiff_t>(a),
                      ids_.begin() + static_cast<std::ptrdiff_t>(a + len),
                      ids_.begin() + static_cast<std::ptrdiff_t>(b));
  }

  const std::vector<std::uint32_t>& positions_of(std::size_t pos) const {
    return positions_[ids_[pos]];
  }

 private:
  std::vector<std::uint32_t> ids_;
  std::vector<std::vector<std::uint32_t>> positions_;
  std::vector<std::uint64_t> prefix_;
  std::vector<std::uint64_t> power_;
};

std::vector<std::string> slice(const std::vector<std::string>& tokens, std::size_t start,
                               std::size_t end) {
  return {tokens.begin() + static_cast<std::ptrdiff_t>(start),
          tokens.begin() + static_cast<std::ptrdiff_t>(end)};
}

bool inside_turn(const Document& doc, const TokenRange& range, Role role) {
  auto turn = doc.turn_at(range.start);
  if (!turn) return false;
  const auto& bound = doc.turn_bounds[*turn];
  return bound.role == role && bound.range.contains(range);
}

void write_summary_field(nlohmann::ordered_json& obj, const char* key, std::size_t value) {
  obj[key] = value;
}

}  // namespace

void MinerConfig::validate() const {
  if (!(positive_rate >= 0.0 && positive_rate <= 1.0)) {
    throw UsageError("positive rate must lie in [0, 1]");
  }
  if (!(negative_rate >= 0.0 && negative_rate <= 1.0)) {
    throw UsageError("negative rate must lie in [0, 1]");
  }
  if (window == 0) throw UsageError("window must be at least 1");
  if (max_span == 0) throw UsageError("max span must be at least 1");
}

std::vector<Triplet> enumerate_triplets(const Document& document,
                                        std::span<const CandidateSpan> candidates) {
  std::vector<Triplet> out;
  if (document.tokens.empty() || candidates.empty()) return out;
  TokenIndex index(document);
  for (const auto& cand : candidates) {
    const std::size_t t = cand.start;
    const std::size_t n = cand.size();
    if (n == 0 || cand.end > document.size()) continue;
    const std::uint64_t target_hash = index.hash(t, n);
    for (std::uint32_t k : index.positions_of(t)) {
      if (k + n > t) break;
      if (index.hash(k, n) == target_hash && index.equal(k, t, n)) out.push_back({t, k, n});
    }
  }
  return out;
}

std::uint64_t document_seed(std::uint64_t seed, std::string_view doc_id) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char c : doc_id) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return splitmix64(seed ^ splitmix64(h));
}

Selection select_and_sample(const Document& document, std::span<const CandidateSpan> candidates,
                            std::span<const Triplet> triplets, const MinerConfig& config,
                            Stage stage) {
  std::vector<TokenRange> spans;
  spans.reserve(candidates.size());
  for (const auto& c : candidates) {
    if (c.size() > 0 && c.size() <= config.max_span) spans.push_back(c.range());
  }
  std::sort(spans.begin(), spans.end(), [](const TokenRange& a, const TokenRange& b) {
    return a.start != b.start ? a.start < b.start : a.end > b.end;
  });
  std::vector<TokenRange> chosen;
  for (const auto& r : spans) {
    if (chosen.empty() || r.start >= chosen.back().end) chosen.push_back(r);
  }

  auto by_cut = [](const Triplet& a, const Triplet& b) {
    if (a.t != b.t) return a.t < b.t;
    if (a.n != b.n) return a.n < b.n;
    return a.k < b.k;
  };
  std::vector<Triplet> sorted(triplets.begin(), triplets.end());
  std::sort(sorted.begin(), sorted.end(), by_cut);

  Selection selection;
  std::mt19937_64 rng(document_seed(config.seed, document.doc_id));
  for (const auto& r : chosen) {
    const double u = unit_draw(rng);
    auto lo = std::lower_bound(sorted.begin(), sorted.end(), Triplet{r.start, 0, r.size()}, by_cut);
    std::vector<std::size_t> ks;
    for (auto it = lo; it != sorted.end() && it->t == r.start && it->n == r.size(); ++it) {
      // Duplicate candidates repeat their triplets.
      if (ks.empty() || ks.back() != it->k) ks.push_back(it->k);
    }
    if (!ks.empty()) {
      if (u >= config.positive_rate) continue;
      if (stage == Stage::posttrain) {
        std::erase_if(ks, [&](std::size_t k) {
          return !inside_turn(document, {k, k + r.size()}, Role::user);
        });
        if (ks.empty() || !inside_turn(document, r, Role::assistant)) {
          ++selection.dropped_posttrain;
          continue;
        }
      }
      selection.positives.push_back({r.start, r.size(), std::move(ks)});
    } else {
      if (u >= config.negative_rate) continue;
      if (stage == Stage::posttrain && !inside_turn(document, r, Role::assistant)) continue;
      selection.negatives.push_back({r.start, r.size()});
    }
  }
  return selection;
}

std::optional<NTEInstance> annotate(const Document& document, std::size_t t, std::size_t n,
                                    std::span<const std::size_t> ks, const MinerConfig& config,
                                    Stage stage) {
  const std::size_t context_start = t > config.window ? t - config.window : 0;
  NTEInstance inst;
  inst.doc_id = document.doc_id;
  inst.stage = stage;
  inst.polarity = Polarity::positive;
  inst.context_tokens = slice(document.tokens, context_start, t);
  inst.tags.assign(t - context_start, Tag::O);
  inst.target_tokens = slice(document.tokens, t, t + n);

  std::vector<std::size_t> sorted(ks.begin(), ks.end());
  std::sort(sorted.begin(), sorted.end());
  std::size_t tagged_end = 0;
  for (std::size_t k : sorted) {
    if (k < context_start || k + n > t || k < tagged_end) continue;
    inst.tags[k - context_start] = Tag::B;
    for (std::size_t i = k + 1; i < k + n; ++i) inst.tags[i - context_start] = Tag::I;
    inst.triplets.push_back({t, k, n});
    tagged_end = k + n;
  }
  if (inst.triplets.empty()) return std::nullopt;
  return inst;
}

NTEInstance annotate_negative(const Document& document, std::size_t t, std::size_t n,
                              const MinerConfig& config, Stage stage) {
  const std::size_t context_start = t > config.window ? t - config.window : 0;
  NTEInstance inst;
  inst.doc_id = document.doc_id;
  inst.stage = stage;
  inst.polarity = Polarity::negative;
  inst.context_tokens = slice(document.tokens, context_start, t);
  inst.tags.assign(t - context_start, Tag::O);
  inst.target_tokens = slice(document.tokens, t, t + n);
  return inst;
}

DocumentResult mine_document(const Document& document, const MinerResources& resources,
                             const MinerConfig& config, Stage stage) {
  DocumentResult result;
  result.sentences = document.sentence_bounds.size();
  result.tokens = document.size();
  if (document.tokens.empty()) return result;
  auto candidates = propose_spans(document, *resources.stopwords, *resources.lexicon,
                                  resources.mode, config.max_span);
  auto triplets = enumerate_triplets(document, candidates);
  Selection selection = select_and_sample(document, candidates, triplets, config, stage);
  result.dropped_posttrain = selection.dropped_posttrain;

  // Merge positives and negatives back into cut order.
  std::size_t p = 0;
  std::size_t q = 0;
  while (p < selection.positives.size() || q < selection.negatives.size()) {
    bool take_positive = q >= selection.negatives.size() ||
                         (p < selection.positives.size() &&
                          selection.positives[p].t < selection.negatives[q].t);
    if (take_positive) {
      const auto& pos = selection.positives[p++];
      auto inst = annotate(document, pos.t, pos.n, pos.ks, config, stage);
      if (inst) {
        result.instances.push_back(std::move(*inst));
      } else {
        ++result.rejected_window;
      }
    } else {
      const auto& neg = selection.negatives[q++];
      result.instances.push_back(annotate_negative(document, neg.t, neg.n, config, stage));
    }
  }
  return result;
}

void ConversionSummary::merge(const ConversionSummary& other) {
  documents += other.documents;
  sentences += other.sentences;
  tokens += other.tokens;
  instances_positive += other.instances_positive;
  instances_negative += other.instances_negative;
  rejected_window += other.rejected_window;
  dropped_posttrain += other.dropped_posttrain;
  failed_documents += other.failed_documents;
  skipped_records += other.skipped_records;
  capped = capped || other.capped;
  if (first_error.empty()) first_error = other.first_error;
}

std::string ConversionSummary::to_json() const {
  nlohmann::ordered_json obj;
  obj["stage"] = std::string(to_string(stage));
  write_summary_field(obj, "documents", documents);
  write_summary_field(obj, "sentences", sentences);
  write_summary_field(obj, "tokens", tokens);
  write_summary_field(obj, "instances_positive", instances_positive);
  write_summary_field(obj, "instances_negative", instances_negative);
  write_summary_field(obj, "rejected_window", rejected_window);
  write_summary_field(obj, "dropped_posttrain", dropped_posttrain);
  write_summary_field(obj, "failed_documents", failed_documents);
  write_summary_field(obj, "skipped_records", skipped_records);
  obj["capped"] = capped;
  obj["first_error"] = first_error;
  return obj.dump();
}

ConversionSummary ConversionSummary::from_json(std::string_view text) {
  auto obj = nlohmann::json::parse(text, nullptr, false);
  if (obj.is_discarded() || !obj.is_object()) throw DataError("malformed conversion summary");
  ConversionSummary s;
  try {
    s.stage = parse_stage(obj.at("stage").get<std::string>());
    s.documents = obj.at("documents").get<std::size_t>();
    s.sentences = obj.at("sentences").get<std::size_t>();
    s.tokens = obj.at("tokens").get<std::size_t>();
    s.instances_positive = obj.at("instances_positive").get<std::size_t>();
    s.instances_negative = obj.at("instances_negative").get<std::size_t>();
    s.rejected_window = obj.value("rejected_window", std::size_t{0});
    s.dropped_posttrain = obj.value("dropped_posttrain", std::size_t{0});
    s.failed_documents = obj.value("failed_documents", std::size_t{0});
    s.skipped_records = obj.value("skipped_records", std::size_t{0});
    s.capped = obj.value("capped", false);
    s.first_error = obj.value("first_error", std::string());
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("conversion summary: ") + e.what());
  }
  return s;
}

namespace {

struct LineOutcome {
  enum class Kind { mined, skipped, failed } kind = Kind::mined;
  DocumentResult result;
  std::string error;
};

LineOutcome process_line(const std::string& line, std::size_t line_number,
                         const ConvertOptions& options, const MinerConfig& config,
                         const MinerResources& resources) {
  LineOutcome outcome;
  try {
    Document doc;
    if (options.kind == InputKind::raw) {
      RawTextRecord record = parse_raw_line(line, line_number);
      doc = tokenize(record.doc_id, record.text);
      doc.span_annotations = std::move(record.spans);
    } else {
      auto record = parse_chat_line(line, line_number);
      if (!record) {
        outcome.kind = LineOutcome::Kind::skipped;
        return outcome;
      }
      doc = build_chat_document(*record);
    }
    outcome.result = mine_document(doc, resources, config, options.stage);
  } catch (const std::exception& e) {
    outcome.kind = LineOutcome::Kind::failed;
    outcome.error = e.what();
  }
  return outcome;
}

// Applies one document's result to the summary and the sink, honoring the cap.
void emit(DocumentResult& result, ConversionSummary& summary, const ConvertOptions& options,
          const InstanceSink& sink) {
  ++summary.documents;
  summary.sentences += result.sentences;
  summary.tokens += result.tokens;
  summary.rejected_window += result.rejected_window;
  summary.dropped_posttrain += result.dropped_posttrain;
  for (auto& inst : result.instances) {
    const std::size_t emitted = summary.instances_positive + summary.instances_negative;
    if (options.cap && emitted >= *options.cap) {
      summary.capped = true;
      break;
    }
    if (inst.polarity == Polarity::positive) {
      ++summary.instances_positive;
    } else {
      ++summary.instances_negative;
    }
    sink(inst);
  }
}

}  // namespace

ConversionSummary convert_corpus(const std::filesystem::path& input, const ConvertOptions& options,
                                 const MinerConfig& config, const MinerResources& resources,
                                 const InstanceSink& sink) {
  config.validate();
  if (options.kind == InputKind::chat && resources.mode == ProposalMode::external) {
    throw UsageError("external span mode needs raw input");
  }
  ConversionSummary summary;
  summary.stage = options.stage;
  LineReader lines(input);
  const std::size_t workers = std::max<std::size_t>(1, options.workers);
  const std::size_t batch = std::max<std::size_t>(1, options.batch_size) * workers;

  std::vector<std::pair<std::size_t, std::string>> pending;
  std::vector<LineOutcome> outcomes;
  auto flush = [&]() {
    outcomes.assign(pending.size(), LineOutcome{});
    auto work = [&](std::size_t worker) {
      for (std::size_t i = worker; i < pending.size(); i += workers) {
        outcomes[i] = process_line(pending[i].second, pending[i].first, options, config, resources);
      }
    };
    if (workers == 1 || pending.size() < 2) {
      work(0);
    } else {
      std::vector<std::jthread> threads;
      threads.reserve(workers);
      for (std::size_t w = 0; w < workers; ++w) threads.emplace_back(work, w);
    }
    for (auto& outcome : outcomes) {
      switch (outcome.kind) {
        case LineOutcome::Kind::skipped:
          ++summary.skipped_records;
          break;
        case LineOutcome::Kind::failed:
          ++summary.failed_documents;
          if (summary.first_error.empty()) summary.first_error = outcome.error;
          break;
        case LineOutcome::Kind::mined:
          emit(outcome.result, summary, options, sink);
          break;
      }
    }
    pending.clear();
  };

  std::string line;
  std::size_t record = 0;
  while (lines.next(line)) {
    if (line.empty()) continue;
    const std::size_t index = record++;
    if (index < options.first_record) continue;
    if (options.record_count && index - options.first_record >= *options.record_count) break;
    pending.emplace_back(lines.line_number(), std::move(line));
    if (pending.size() >= batch) flush();
  }
  flush();
  return summary;
}

ConversionSummary convert_documents(std::span<const Document> documents,
                                    const ConvertOptions& options, const MinerConfig& config,
                                    const MinerResources& resources, const InstanceSink& sink) {
  config.validate();
  ConversionSummary summary;
  summary.stage = options.stage;
  for (const auto& doc : documents) {
    try {
      DocumentResult result = mine_document(doc, resources, config, options.stage);
      emit(result, summary, options, sink);
    } catch (const std::exception& e) {
      ++summary.failed_documents;
      if (summary.first_error.empty()) summary.first_error = e.what();
    }
  }
  return summary;
}

}  // namespace ntekit
