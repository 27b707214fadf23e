#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ntekit/corpus_io.hpp"
#include "ntekit/text_core.hpp"

namespace ntekit {

struct MinerConfig {
  double positive_rate = 0.05;
  double negative_rate = 0.05;
  std::size_t window = 512;
  std::size_t max_span = kMaxSpanTokens;
  std::uint64_t seed = 0;

  // Throws UsageError when a rate leaves [0, 1] or the window is zero.
  void validate() const;
};

// Every earlier occurrence of every candidate span: for a candidate at
// [t, t + n), each k with k + n <= t and tokens[k, k + n) == tokens[t, t + n).
// Ordered by candidate, then k. Markup tokens never match.
std::vector<Triplet> enumerate_triplets(const Document& document,
                                        std::span<const CandidateSpan> candidates);

struct PositiveSelection {
  std::size_t t = 0;
  std::size_t n = 0;
  std::vector<std::size_t> ks;
  bool operator==(const PositiveSelection&) const = default;
};

struct NegativeSelection {
  std::size_t t = 0;
  std::size_t n = 0;
  bool operator==(const NegativeSelection&) const = default;
};

struct Selection {
  std::vector<PositiveSelection> positives;
  std::vector<NegativeSelection> negatives;
  // Positives lost to the chat-turn constraint.
  std::size_t dropped_posttrain = 0;
};

// Stable 64-bit seed for a document's sampler.
std::uint64_t document_seed(std::uint64_t seed, std::string_view doc_id);

// Makes candidates pairwise disjoint (earliest start, then longest, wins),
// draws one uniform per surviving span from the document's generator, keeps
// duplicative spans at positive_rate and never-seen spans at negative_rate.
// In the posttrain stage a cut must sit inside an assistant turn and only
// occurrences inside user turns are kept.
Selection select_and_sample(const Document& document, std::span<const CandidateSpan> candidates,
                            std::span<const Triplet> triplets, const MinerConfig& config,
                            Stage stage);

// Positive instance for cut t and span length n. Context is the `window`
// tokens before t. Occurrences that fall before the window are dropped and
// overlapping occurrences are tagged left to right without overlap; the
// kept ones are recorded as the instance's triplets (document coordinates).
// Returns nullopt if no occurrence survives.
std::optional<NTEInstance> annotate(const Document& document, std::size_t t, std::size_t n,
                                    std::span<const std::size_t> ks, const MinerConfig& config,
                                    Stage stage = Stage::pretrain);

NTEInstance annotate_negative(const Document& document, std::size_t t, std::size_t n,
                              const MinerConfig& config, Stage stage = Stage::pretrain);

struct MinerResources {
  const StopwordSet* stopwords = nullptr;
  const Lexicon* lexicon = nullptr;
  ProposalMode mode = ProposalMode::heuristic;
};

struct DocumentResult {
  std::vector<NTEInstance> instances;
  std::size_t sentences = 0;
  std::size_t tokens = 0;
  std::size_t rejected_window = 0;
  std::size_t dropped_posttrain = 0;
};

// tokenize -> propose -> enumerate -> sample -> annotate for one document.
DocumentResult mine_document(const Document& document, const MinerResources& resources,
                             const MinerConfig& config, Stage stage);

struct ConversionSummary {
  Stage stage = Stage::pretrain;
  std::size_t documents = 0;
  std::size_t sentences = 0;
  std::size_t tokens = 0;
  std::size_t instances_positive = 0;
  std::size_t instances_negative = 0;
  std::size_t rejected_window = 0;
  std::size_t dropped_posttrain = 0;
  std::size_t failed_documents = 0;
  std::size_t skipped_records = 0;
  bool capped = false;
  std::string first_error;

  void merge(const ConversionSummary& other);
  std::string to_json() const;
  static ConversionSummary from_json(std::string_view text);
  bool operator==(const ConversionSummary&) const = default;
};

enum class InputKind { raw, chat };

struct ConvertOptions {
  InputKind kind = InputKind::raw;
  Stage stage = Stage::pretrain;
  std::optional<std::size_t> cap;
  std::size_t workers = 1;
  std::size_t batch_size = 256;
  // Restricts the run to non-empty input lines [first_record,
  // first_record + record_count); used for sharding.
  std::size_t first_record = 0;
  std::optional<std::size_t> record_count;
};

using InstanceSink = std::function<void(const NTEInstance&)>;

// Streams the input file through mine_document on `workers` threads.
// Instances reach the sink grouped by document in input order, so the output
// is independent of the worker count. A record that fails to parse or mine
// is counted and skipped.
ConversionSummary convert_corpus(const std::filesystem::path& input, const ConvertOptions& options,
                                 const MinerConfig& config, const MinerResources& resources,
                                 const InstanceSink& sink);

// In-memory variant over already-built documents (single worker).
ConversionSummary convert_documents(std::span<const Document> documents,
                                    const ConvertOptions& options, const MinerConfig& config,
                                    const MinerResources& resources, const InstanceSink& sink);

}  // namespace ntekit
