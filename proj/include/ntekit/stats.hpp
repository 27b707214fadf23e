#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "ntekit/corpus_io.hpp"
#include "ntekit/nte_miner.hpp"

namespace ntekit {

struct CorpusReport {
  std::size_t documents = 0;
  std::size_t sentences = 0;
  std::size_t tokens = 0;
  std::size_t instances_positive = 0;
  std::size_t instances_negative = 0;
  // Instances per sentence, in percent. Basis: all tokenized sentences.
  double conversion_rate = 0.0;
  double conversion_rate_positive = 0.0;
  std::size_t unique_spans = 0;
  bool unique_spans_approximate = false;
  std::map<std::size_t, std::size_t> span_length_histogram;
  double frac_span_ge4 = 0.0;
  std::map<std::size_t, std::size_t> context_length_histogram;
  // Target tokens of positives over corpus tokens.
  double token_usage_rate = 0.0;
  // Distinct B/I-tagged document positions over corpus tokens.
  double tagged_position_rate = 0.0;

  bool operator==(const CorpusReport&) const = default;
};

// Fixed-size HyperLogLog sketch (2^14 registers) for approximate span counts.
class CardinalitySketch {
 public:
  CardinalitySketch() : registers_{} {}
  void add(std::uint64_t hash);
  void merge(const CardinalitySketch& other);
  double estimate() const;

 private:
  static constexpr int kPrecision = 14;
  std::array<std::uint8_t, std::size_t{1} << kPrecision> registers_;
};

// Streaming fold over NTE instances. Partial accumulators over disjoint
// document shards merge associatively.
class ReportAccumulator {
 public:
  explicit ReportAccumulator(bool approximate_unique = false)
      : approximate_(approximate_unique) {}

  void add(const NTEInstance& instance);
  void merge(const ReportAccumulator& other);
  // Checks the stream against the summary (DataError on mismatch) and
  // produces the final report.
  CorpusReport finish(const ConversionSummary& summary) const;

 private:
  bool approximate_;
  std::size_t positives_ = 0;
  std::size_t negatives_ = 0;
  std::size_t target_mass_ = 0;
  std::size_t span_ge4_ = 0;
  std::map<std::size_t, std::size_t> span_lengths_;
  std::map<std::size_t, std::size_t> context_lengths_;
  std::unordered_set<std::string> spans_;
  CardinalitySketch sketch_;
  std::unordered_map<std::string, std::vector<TokenRange>> tagged_;
};

// Single pass over an nte.jsonl file.
CorpusReport compute_report(const std::filesystem::path& nte_path, const ConversionSummary& summary,
                            bool approximate_unique = false);

enum class ReportFormat { human, machine };

std::string render_report(const CorpusReport& report, ReportFormat format);
// Inverse of the machine format.
CorpusReport parse_report(std::string_view machine_line);

}  // namespace ntekit
