// One PASS/FAIL line per acceptance criterion.
//
//   acceptance [--only NAME] [--list]

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <json.hpp>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "ntekit/bench_builder.hpp"
#include "ntekit/digest.hpp"
#include "ntekit/nte_miner.hpp"
#include "ntekit/stats.hpp"
#include "ntekit/text_core.hpp"
#include "oracles/metric_cases.hpp"
#include "oracles/oracles.hpp"

using namespace ntekit;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fixture(const std::string& name) { return std::string(NTEKIT_FIXTURES) + "/" + name; }

struct Resources {
  StopwordSet stop = StopwordSet::load(std::string(NTEKIT_DATA_DIR) + "/stopwords.txt");
  Lexicon lex = Lexicon::load(std::string(NTEKIT_DATA_DIR) + "/pos_lexicon.tsv");
  MinerResources get() const { return {&stop, &lex, ProposalMode::heuristic}; }
};

const Resources& resources() {
  static const Resources r;
  return r;
}

MinerConfig rates(double pos, double neg) {
  MinerConfig cfg;
  cfg.positive_rate = pos;
  cfg.negative_rate = neg;
  return cfg;
}

class Scratch {
 public:
  Scratch() {
    path_ = fs::temp_directory_path() / ("ntekit-acceptance-" + std::to_string(std::random_device{}()));
    fs::create_directories(path_);
  }
  ~Scratch() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

std::string file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ConversionSummary convert_to_file(const fs::path& input, const fs::path& output, ConvertOptions opts,
                                  const MinerConfig& cfg) {
  std::ofstream out(output, std::ios::binary);
  return convert_corpus(input, opts, cfg, resources().get(),
                        [&](const NTEInstance& inst) { out << to_jsonl(inst) << '\n'; });
}

// ---- criteria --------------------------------------------------------------

Outcome miner_oracle() {
  const auto start = Clock::now();
  std::mt19937_64 rng(20240611);
  const MinerConfig cfg = rates(1.0, 1.0);
  std::size_t docs = 0, triplet_total = 0, instances = 0;
  for (; docs < 1000; ++docs) {
    auto doc = oracle::random_document(rng, "r" + std::to_string(docs));
    auto cands = oracle::random_candidates(rng, doc);
    const auto got = enumerate_triplets(doc, cands);
    const auto want = oracle::triplets(doc, cands);
    if (got != want) return {false, doc.doc_id + ": triplets differ"};
    triplet_total += got.size();

    // Every candidate with an earlier occurrence, annotated with all its ks.
    std::map<std::pair<std::size_t, std::size_t>, std::vector<std::size_t>> by_cut;
    for (const auto& tr : want) by_cut[{tr.t, tr.n}].push_back(tr.k);
    for (auto& [cut, ks] : by_cut) {
      std::sort(ks.begin(), ks.end());
      ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
    }

    // At rates 1/1 every disjoint span is kept: positive if it repeats, else negative.
    const auto selection = select_and_sample(doc, cands, got, cfg, Stage::pretrain);
    std::vector<PositiveSelection> pos_want;
    std::vector<NegativeSelection> neg_want;
    for (const auto& span : oracle::disjoint_spans(cands, cfg.max_span)) {
      auto it = by_cut.find({span.start, span.size()});
      if (it != by_cut.end()) {
        pos_want.push_back({span.start, span.size(), it->second});
      } else {
        neg_want.push_back({span.start, span.size()});
      }
    }
    if (selection.positives != pos_want || selection.negatives != neg_want) {
      return {false, doc.doc_id + ": selection at rates 1/1 differs"};
    }

    for (const auto& [cut, ks] : by_cut) {
      const auto [t, n] = cut;
      auto inst = annotate(doc, t, n, ks, cfg);
      if (!inst) return {false, doc.doc_id + ": annotate dropped a cut"};
      const std::size_t from = t > cfg.window ? t - cfg.window : 0;
      const std::vector<std::string> context(doc.tokens.begin() + from, doc.tokens.begin() + t);
      const std::vector<std::string> target(doc.tokens.begin() + t, doc.tokens.begin() + t + n);
      const auto tags = oracle::scan_tags(context, target);
      std::vector<Triplet> trips;
      for (std::size_t i = 0; i < tags.size(); ++i) {
        if (tags[i] == Tag::B) trips.push_back({t, from + i, n});
      }
      if (inst->context_tokens != context) return {false, doc.doc_id + ": context differs"};
      if (inst->target_tokens != target) return {false, doc.doc_id + ": target differs"};
      if (inst->tags != tags) return {false, doc.doc_id + ": tags differ at t=" + std::to_string(t)};
      if (inst->triplets != trips) return {false, doc.doc_id + ": instance triplets differ"};
      ++instances;
    }
  }
  const double secs = seconds_since(start);
  std::ostringstream d;
  d << docs << " docs, " << triplet_total << " triplets, " << instances << " annotated cuts, " << secs
    << " s (limit 10 s)";
  return {secs < 10.0, d.str()};
}

Outcome tag_soundness() {
  std::size_t checked = 0, violations = 0;
  std::string first;
  convert_corpus(fixture("corpus.jsonl"), {}, rates(1.0, 1.0), resources().get(), [&](const NTEInstance& inst) {
    if (checked >= 10000) return;
    ++checked;
    if (auto problem = oracle::check_instance(inst, MinerConfig{}.window)) {
      if (violations++ == 0) first = inst.doc_id + ": " + *problem;
    }
  });
  std::ostringstream d;
  d << checked << " instances, " << violations << " violations";
  if (!first.empty()) d << " (first: " << first << ")";
  return {checked == 10000 && violations == 0, d.str()};
}

Outcome posttrain() {
  const MinerConfig cfg = rates(1.0, 1.0);
  ChatJsonlReader reader(fixture("chat.jsonl"));
  std::size_t records = 0, tagged = 0, tagged_user = 0, cuts = 0, cuts_assistant = 0, positives = 0;
  while (auto rec = reader.next()) {
    ++records;
    const auto doc = build_chat_document(*rec);
    const auto result = mine_document(doc, resources().get(), cfg, Stage::posttrain);
    auto role_at = [&](std::size_t pos) -> std::optional<Role> {
      auto turn = doc.turn_at(pos);
      if (!turn) return std::nullopt;
      return doc.turn_bounds[*turn].role;
    };
    for (const auto& inst : result.instances) {
      if (inst.polarity != Polarity::positive) continue;
      if (inst.triplets.empty()) return {false, "positive without triplets"};
      ++positives;
      const std::size_t t = inst.triplets.front().t;
      const std::size_t from = t - inst.context_tokens.size();
      for (std::size_t i = 0; i < inst.tags.size(); ++i) {
        if (inst.tags[i] == Tag::O) continue;
        ++tagged;
        if (role_at(from + i) == Role::user) ++tagged_user;
      }
      for (std::size_t i = 0; i < inst.target_tokens.size(); ++i) {
        ++cuts;
        if (role_at(t + i) == Role::assistant) ++cuts_assistant;
      }
    }
  }
  std::ostringstream d;
  d << records << " records, " << positives << " positives; tagged in user turns " << tagged_user << "/" << tagged
    << ", cut tokens in assistant turns " << cuts_assistant << "/" << cuts;
  const bool ok = records == 200 && positives > 0 && tagged == tagged_user && cuts == cuts_assistant;
  return {ok, d.str()};
}

Outcome determinism() {
  Scratch dir;
  const auto input = fixture("corpus.jsonl");
  const MinerConfig cfg;
  convert_to_file(input, dir / "a.jsonl", {}, cfg);
  convert_to_file(input, dir / "b.jsonl", {}, cfg);

  // Four contiguous shards, concatenated.
  std::size_t records = 0;
  {
    LineReader lines(input);
    std::string line;
    while (lines.next(line)) records += !line.empty();
  }
  std::string sharded;
  const std::size_t per = (records + 3) / 4;
  for (std::size_t s = 0; s < 4; ++s) {
    ConvertOptions opts;
    opts.first_record = s * per;
    opts.record_count = per;
    convert_to_file(input, dir / "shard.jsonl", opts, cfg);
    sharded += file_bytes(dir / "shard.jsonl");
  }
  ConvertOptions threaded;
  threaded.workers = 4;
  convert_to_file(input, dir / "c.jsonl", threaded, cfg);

  const auto a = sha256_file(dir / "a.jsonl"), b = sha256_file(dir / "b.jsonl");
  const auto c = sha256_hex(sharded), w = sha256_file(dir / "c.jsonl");
  std::ostringstream d;
  d << "run1 " << a.substr(0, 12) << ", run2 " << b.substr(0, 12) << ", 4 shards " << c.substr(0, 12)
    << ", 4 workers " << w.substr(0, 12);
  return {a == b && a == c && a == w && fs::file_size(dir / "a.jsonl") > 0, d.str()};
}

Outcome statistics() {
  Scratch dir;
  const auto nte = dir / "nte.jsonl";
  const auto summary_path = dir / "nte.jsonl.summary.json";
  const auto summary = convert_to_file(fixture("corpus.jsonl"), nte, {}, MinerConfig{});
  {
    std::ofstream s(summary_path);
    s << summary.to_json() << '\n';
  }
  const auto report = compute_report(nte, summary);

  const std::string cmd = std::string("\"") + NTEKIT_PYTHON + "\" \"" + NTEKIT_RECOUNT + "\" \"" + nte.string() +
                          "\" \"" + summary_path.string() + "\"";
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return {false, "cannot run recount script"};
  std::string text;
  char buf[4096];
  while (std::size_t got = fread(buf, 1, sizeof buf, pipe)) text.append(buf, got);
  if (pclose(pipe) != 0) return {false, "recount script failed"};

  const auto ours = nlohmann::json::parse(render_report(report, ReportFormat::machine));
  const auto theirs = nlohmann::json::parse(text);
  std::vector<std::string> mismatched;
  std::size_t fields = 0;
  for (const auto& [key, value] : theirs.items()) {
    ++fields;
    if (!ours.contains(key)) {
      mismatched.push_back(key + " (missing)");
      continue;
    }
    const auto& mine = ours.at(key);
    const bool same = value.is_number_float() || mine.is_number_float()
                          ? std::fabs(value.get<double>() - mine.get<double>()) <= 1e-12
                          : value == mine;
    if (!same) mismatched.push_back(key);
  }
  const auto human = render_report(report, ReportFormat::human);
  bool references = true;
  for (const char* ref : {"332%", "235%", "4.52%", "4.06%", "4.14%"}) {
    references = references && human.find(ref) != std::string::npos;
  }
  std::ostringstream d;
  d << fields << " fields recounted, " << mismatched.size() << " mismatched";
  for (const auto& m : mismatched) d << " " << m;
  d << "; reference values " << (references ? "printed" : "missing");
  return {fields >= 14 && mismatched.empty() && references, d.str()};
}

Outcome metrics() {
  const auto cases = oracle::metric_cases();
  std::vector<std::string> failed;
  for (const auto& c : cases) {
    if (!c.passes()) failed.push_back(c.name);
  }
  std::ostringstream d;
  d << cases.size() << " cases, " << failed.size() << " failed";
  for (const auto& f : failed) d << "; " << f;
  return {cases.size() >= 20 && failed.empty(), d.str()};
}

Outcome preference() {
  auto apply = [](std::vector<std::string> answers, PreferenceKind kind) {
    std::string ctx;
    for (const auto& a : answers) ctx += a + " ; ";
    return apply_preference(GoldMRCRecord{"q", ctx, "Where?", std::move(answers), std::nullopt},
                            preference_rule(kind))
        .answers;
  };
  using V = std::vector<std::string>;
  std::vector<std::string> failed;
  if (apply({"Los Angeles", "the US", "US"}, PreferenceKind::concise) != V{"Los Angeles", "US"}) failed.push_back("concise");
  if (apply({"Bruno Mars", "Mars"}, PreferenceKind::longest) != V{"Bruno Mars"}) failed.push_back("longest");
  if (apply({"Bruno Mars", "Mars"}, PreferenceKind::shortest) != V{"Mars"}) failed.push_back("shortest");

  std::mt19937_64 rng(7);
  const V words = {"the", "US", "Los", "Angeles", "city", "of", "a", "big", "Bruno", "Mars"};
  std::size_t sets = 0, non_idempotent = 0;
  for (; sets < 1000; ++sets) {
    V set(1 + rng() % 6);
    for (auto& s : set) {
      V toks(1 + rng() % 4);
      for (auto& t : toks) t = words[rng() % words.size()];
      s = join_tokens(toks, 0, toks.size());
    }
    for (auto kind : {PreferenceKind::longest, PreferenceKind::shortest, PreferenceKind::concise}) {
      const auto once = apply(set, kind);
      if (apply(once, kind) != once) ++non_idempotent;
    }
  }
  std::ostringstream d;
  d << "examples " << (failed.empty() ? "exact" : "failed:");
  for (const auto& f : failed) d << " " << f;
  d << "; " << sets << " random sets x 3 rules, " << non_idempotent << " not idempotent";
  return {failed.empty() && non_idempotent == 0, d.str()};
}

Outcome disambiguation() {
  std::vector<GoldEntityRecord> records;
  {
    ConllReader reader(fixture("disamb_input.conll"));
    while (auto r = reader.next()) records.push_back(std::move(*r));
  }
  const auto preset = disambiguation_preset("conll");
  auto options = [&](const fs::path& audit, std::size_t concurrency) {
    DisambiguationOptions opts;
    opts.target_label = preset.target_label;
    opts.instruction = preset.instruction;
    opts.audit_path = audit;
    opts.concurrency = concurrency;
    return opts;
  };
  auto lines = [](const std::vector<GoldEntityRecord>& rs) {
    std::string out;
    for (const auto& r : rs) out += to_jsonl(r) + "\n";
    return out;
  };

  std::ostringstream d;
  bool ok = true;
  for (std::size_t workers : {1u, 4u}) {
    Scratch dir;
    auto judge = ScriptedJudge::load(fixture("judge_script.jsonl"));
    const auto out = filter_disambiguation(records, options(dir / "audit.jsonl", workers), judge);
    const bool same_out = lines(out) == file_bytes(fixture("disamb_expected.jsonl"));
    const bool same_audit = file_bytes(dir / "audit.jsonl") == file_bytes(fixture("disamb_audit_expected.jsonl"));
    ok = ok && same_out && same_audit;
    d << "scripted x" << workers << ": output " << (same_out ? "==" : "!=") << " golden, audit "
      << (same_audit ? "==" : "!=") << " golden; ";
  }
  Scratch dir;
  AllYesJudge yes;
  const auto kept = filter_disambiguation(records, options(dir / "audit.jsonl", 3), yes);
  bool identity = kept.size() == records.size();
  for (std::size_t i = 0; identity && i < kept.size(); ++i) {
    identity = kept[i].tokens == records[i].tokens && kept[i].entities == records[i].entities;
  }
  d << "all-yes " << (identity ? "is" : "is not") << " the identity on " << records.size() << " records";
  return {ok && identity, d.str()};
}

// ---- throughput ------------------------------------------------------------

// Newswire-like synthetic corpus: small casts of names and noun phrases that
// recur within a document, so the miner finds realistic repeats.
std::size_t write_synthetic_corpus(const fs::path& path, std::size_t docs) {
  static const std::vector<std::string> first = {"Maria", "John", "Aisha", "Kenji", "Elena", "Tomas", "Priya",
                                                 "Lars", "Fatima", "Diego", "Hannah", "Omar"};
  static const std::vector<std::string> last = {"Lopez", "Smith", "Khan", "Tanaka", "Petrova", "Novak",
                                                "Sharma", "Berg", "Haddad", "Ruiz", "Fischer", "Rossi"};
  static const std::vector<std::string> orgs = {"Acme Corp", "Northwind Traders", "Globex", "the Harbor Authority",
                                                "Blue River Bank", "the city council", "Helios Energy"};
  static const std::vector<std::string> places = {"Lisbon", "Oslo", "Nairobi", "Osaka", "Quebec", "Porto", "Accra"};
  static const std::vector<std::string> adjs = {"old", "new", "small", "large", "public", "northern", "local",
                                                "annual", "main", "historic", "quiet", "modern"};
  static const std::vector<std::string> nouns = {"harbor", "bridge", "library", "market", "station", "school",
                                                 "hospital", "museum", "factory", "garden", "report", "budget"};
  static const std::vector<std::string> verbs = {"visited", "praised", "described", "criticized", "funded",
                                                 "inspected", "reviewed", "mentioned", "restored"};
  std::mt19937_64 rng(99);
  auto pick = [&](const std::vector<std::string>& v) -> const std::string& { return v[rng() % v.size()]; };
  std::ofstream out(path, std::ios::binary);
  std::size_t words = 0;
  for (std::size_t i = 0; i < docs; ++i) {
    const std::string people[2] = {pick(first) + " " + pick(last), pick(first) + " " + pick(last)};
    const std::string org = pick(orgs), place = pick(places);
    const std::string things[3] = {"the " + pick(adjs) + " " + pick(nouns), "the " + pick(adjs) + " " + pick(nouns),
                                   "the " + pick(adjs) + " " + pick(nouns)};
    std::string text;
    for (int s = 0; s < 10; ++s) {
      const auto& p = people[rng() % 2];
      const auto& t = things[rng() % 3];
      switch (rng() % 4) {
        case 0: text += p + " " + pick(verbs) + " " + t + " in " + place + ". "; break;
        case 1: text += org + " " + pick(verbs) + " " + t + " near " + things[rng() % 3] + ". "; break;
        case 2: text += "Officials said " + t + " would reopen soon. "; break;
        default: text += p + " and " + people[rng() % 2] + " met " + org + " in " + place + ". "; break;
      }
    }
    text.pop_back();
    words += std::count(text.begin(), text.end(), ' ') + 1;
    out << nlohmann::json{{"id", "syn-" + std::to_string(i)}, {"text", text}}.dump() << '\n';
  }
  return words;
}

struct TimedRun {
  double seconds = 0;
  ConversionSummary summary;
};

TimedRun timed_convert(const fs::path& input, const fs::path& output, std::size_t workers) {
  ConvertOptions opts;
  opts.workers = workers;
  const auto start = Clock::now();
  TimedRun run;
  run.summary = convert_to_file(input, output, opts, MinerConfig{});
  run.seconds = seconds_since(start);
  return run;
}

constexpr std::size_t kSyntheticDocs = 100000;

Outcome throughput() {
  Scratch dir;
  write_synthetic_corpus(dir / "synthetic.jsonl", kSyntheticDocs);
  const auto run = timed_convert(dir / "synthetic.jsonl", dir / "out.jsonl", 1);
  std::ostringstream d;
  d << run.summary.documents << " docs, " << run.summary.tokens << " tokens, " << run.seconds
    << " s on 1 worker (limit 60 s), "
    << static_cast<std::size_t>(static_cast<double>(run.summary.tokens) / run.seconds) << " tokens/s";
  const bool size_ok = run.summary.documents == kSyntheticDocs && run.summary.tokens >= 9000000;
  return {size_ok && run.seconds < 60.0, d.str()};
}

Outcome speedup() {
  Scratch dir;
  write_synthetic_corpus(dir / "synthetic.jsonl", kSyntheticDocs);
  const auto one = timed_convert(dir / "synthetic.jsonl", dir / "one.jsonl", 1);
  const auto four = timed_convert(dir / "synthetic.jsonl", dir / "four.jsonl", 4);
  const double ratio = one.seconds / four.seconds;
  const bool same = sha256_file(dir / "one.jsonl") == sha256_file(dir / "four.jsonl");
  std::ostringstream d;
  d << "1 worker " << one.seconds << " s, 4 workers " << four.seconds << " s, speedup " << ratio
    << "x (need >= 3x); hardware threads " << std::thread::hardware_concurrency()
    << "; outputs " << (same ? "identical" : "differ");
  return {ratio >= 3.0 && same, d.str()};
}

const std::vector<std::pair<std::string, std::function<Outcome()>>>& criteria() {
  static const std::vector<std::pair<std::string, std::function<Outcome()>>> all = {
      {"miner_oracle", miner_oracle}, {"tag_soundness", tag_soundness}, {"posttrain", posttrain},
      {"determinism", determinism},   {"statistics", statistics},       {"metrics", metrics},
      {"preference", preference},     {"disambiguation", disambiguation}, {"throughput", throughput},
      {"speedup", speedup},
  };
  return all;
}

}  // namespace

int main(int argc, char** argv) {
  std::string only;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--only" && i + 1 < argc) {
      only = argv[++i];
    } else if (arg == "--list") {
      for (const auto& [name, fn] : criteria()) std::cout << name << "\n";
      return 0;
    } else {
      std::cerr << "usage: acceptance [--only NAME] [--list]\n";
      return 1;
    }
  }
  int failures = 0, ran = 0;
  for (const auto& [name, fn] : criteria()) {
    if (!only.empty() && name != only) continue;
    ++ran;
    Outcome outcome;
    try {
      outcome = fn();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    std::cout << (outcome.pass ? "PASS " : "FAIL ") << name << ": " << outcome.detail << std::endl;
    failures += !outcome.pass;
  }
  if (ran == 0) {
    std::cerr << "unknown criterion " << only << "\n";
    return 1;
  }
  return failures == 0 ? 0 : 1;
}
