#include "ntekit/cli.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <json.hpp>
#include <set>
#include <sstream>

#include "ntekit/bench_builder.hpp"
#include "ntekit/corpus_io.hpp"
#include "ntekit/digest.hpp"
#include "ntekit/metrics.hpp"
#include "ntekit/nte_miner.hpp"
#include "ntekit/stats.hpp"
#include "ntekit/template_engine.hpp"

namespace ntekit::cli {
namespace {

namespace fs = std::filesystem;
using ordered = nlohmann::ordered_json;

const std::string kDataDir = NTEKIT_DATA_DIR;

struct Manifest {
  std::string subcommand;
  std::vector<std::string> argv;
  std::optional<std::uint64_t> seed;
  ordered config = ordered::object();
  std::vector<fs::path> inputs;
  std::vector<fs::path> outputs;
};

std::string utc_now() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

void write_manifest(const fs::path& path, const Manifest& m) {
  ordered obj;
  obj["tool"] = "ntekit";
  obj["version"] = version();
  obj["subcommand"] = m.subcommand;
  obj["argv"] = m.argv;
  obj["cwd"] = fs::current_path().string();
  obj["seed"] = m.seed ? ordered(*m.seed) : ordered(nullptr);
  obj["config"] = m.config;
  ordered inputs = ordered::object();
  for (const auto& p : m.inputs) inputs[p.string()] = sha256_file(p);
  // A --config file shapes the run as much as the flags do.
  for (std::size_t i = 0; i < m.argv.size(); ++i) {
    std::string file;
    if (m.argv[i] == "--config" && i + 1 < m.argv.size()) file = m.argv[i + 1];
    if (m.argv[i].starts_with("--config=")) file = m.argv[i].substr(9);
    if (!file.empty()) inputs[file] = sha256_file(file);
  }
  obj["inputs"] = std::move(inputs);
  ordered outputs = ordered::object();
  for (const auto& p : m.outputs) outputs[p.string()] = sha256_file(p);
  obj["outputs"] = std::move(outputs);
  obj["created_at"] = utc_now();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write manifest " + path.string());
  out << obj.dump(2) << "\n";
}

fs::path with_suffix(const fs::path& p, std::string_view suffix) {
  return fs::path(p.string() + std::string(suffix));
}

bool looks_jsonl(const fs::path& p) {
  const auto ext = p.extension().string();
  return ext == ".jsonl" || ext == ".json";
}

std::vector<GoldEntityRecord> read_entities(const fs::path& path, std::size_t* repairs = nullptr) {
  std::vector<GoldEntityRecord> out;
  if (looks_jsonl(path)) {
    EntityJsonlReader reader(path);
    while (auto rec = reader.next()) {
      validate(*rec);
      out.push_back(std::move(*rec));
    }
  } else {
    ConllReader reader(path);
    while (auto rec = reader.next()) out.push_back(std::move(*rec));
    if (repairs) *repairs = reader.repairs();
  }
  return out;
}

std::vector<GoldMRCRecord> read_mrc(const fs::path& path) {
  std::vector<GoldMRCRecord> out;
  MrcJsonlReader reader(path);
  while (auto rec = reader.next()) {
    validate(*rec);
    out.push_back(std::move(*rec));
  }
  return out;
}

void write_text(const std::optional<fs::path>& path, const std::string& text, std::ostream& out) {
  if (!path) {
    out << text;
    return;
  }
  std::ofstream file(*path, std::ios::binary | std::ios::trunc);
  if (!file) throw DataError("cannot write " + path->string());
  file << text;
}

std::string ensure_newline(std::string s) {
  if (s.empty() || s.back() != '\n') s += '\n';
  return s;
}

// Words used in prompts for the CoNLL tag set; other labels are lowercased
// with separators turned into spaces.
std::string label_text(const std::string& label) {
  static const std::map<std::string, std::string> kNames{
      {"PER", "person"}, {"ORG", "organization"}, {"LOC", "location"}, {"MISC", "miscellaneous"}};
  if (auto it = kNames.find(label); it != kNames.end()) return it->second;
  std::string out = to_lower_ascii(label);
  for (auto& c : out) {
    if (c == '_' || c == '-') c = ' ';
  }
  return out;
}

// ---- convert -------------------------------------------------------------

struct ConvertArgs {
  std::string input;
  std::string output;
  std::string stage = "pretrain";
  std::string input_kind = "auto";
  double positive_rate = 0.05;
  double negative_rate = 0.05;
  std::size_t window = 512;
  std::size_t max_span = kMaxSpanTokens;
  std::uint64_t seed = 0;
  std::optional<std::size_t> cap;
  std::size_t workers = 1;
  std::size_t shards = 1;
  std::string proposal = "heuristic";
  std::string stopwords = kDataDir + "/stopwords.txt";
  std::string lexicon = kDataDir + "/pos_lexicon.tsv";
  std::string summary;
};

std::size_t count_records(const fs::path& path) {
  LineReader lines(path);
  std::string line;
  std::size_t n = 0;
  while (lines.next(line)) n += !line.empty();
  return n;
}

void append_file(std::ofstream& out, const fs::path& part) {
  std::ifstream in(part, std::ios::binary);
  out << in.rdbuf();
}

int do_convert(const ConvertArgs& a, const std::vector<std::string>& argv, std::ostream& out,
               std::ostream& err) {
  MinerConfig config;
  config.positive_rate = a.positive_rate;
  config.negative_rate = a.negative_rate;
  config.window = a.window;
  config.max_span = a.max_span;
  config.seed = a.seed;
  config.validate();
  if (a.workers == 0) throw UsageError("--workers must be at least 1");
  if (a.shards == 0) throw UsageError("--shards must be at least 1");

  ConvertOptions options;
  options.stage = parse_stage(a.stage);
  if (a.input_kind == "auto") {
    options.kind = options.stage == Stage::posttrain ? InputKind::chat : InputKind::raw;
  } else {
    options.kind = a.input_kind == "chat" ? InputKind::chat : InputKind::raw;
  }
  options.cap = a.cap;
  options.workers = a.workers;

  const StopwordSet stopwords = StopwordSet::load(a.stopwords);
  const Lexicon lexicon = Lexicon::load(a.lexicon);
  MinerResources resources{&stopwords, &lexicon,
                           a.proposal == "external" ? ProposalMode::external : ProposalMode::heuristic};

  const fs::path input = a.input;
  const fs::path output = a.output;
  ConversionSummary summary;
  summary.stage = options.stage;
  if (a.shards == 1) {
    JsonlWriter writer(output);
    summary = convert_corpus(input, options, config, resources,
                             [&](const NTEInstance& inst) { writer.write_line(to_jsonl(inst)); });
    writer.flush();
  } else {
    const std::size_t total = count_records(input);
    const std::size_t per = (total + a.shards - 1) / a.shards;
    std::vector<fs::path> parts;
    for (std::size_t s = 0; s < a.shards; ++s) {
      ConvertOptions shard = options;
      shard.first_record = std::min(total, s * per);
      shard.record_count = std::min(per, total - shard.first_record);
      if (a.cap) {
        const std::size_t emitted = summary.instances_positive + summary.instances_negative;
        shard.cap = *a.cap > emitted ? *a.cap - emitted : 0;
      }
      parts.push_back(with_suffix(output, ".shard-" + std::to_string(s)));
      JsonlWriter writer(parts.back());
      summary.merge(convert_corpus(input, shard, config, resources, [&](const NTEInstance& inst) {
        writer.write_line(to_jsonl(inst));
      }));
      writer.flush();
    }
    std::ofstream merged(output, std::ios::binary | std::ios::trunc);
    if (!merged) throw DataError("cannot write " + output.string());
    for (const auto& part : parts) append_file(merged, part);
    merged.close();
    for (const auto& part : parts) fs::remove(part);
  }

  const fs::path summary_path = a.summary.empty() ? with_suffix(output, ".summary.json") : fs::path(a.summary);
  {
    std::ofstream s(summary_path, std::ios::binary | std::ios::trunc);
    if (!s) throw DataError("cannot write " + summary_path.string());
    s << summary.to_json() << "\n";
  }

  Manifest m;
  m.subcommand = "convert";
  m.argv = argv;
  m.seed = a.seed;
  m.config = {{"stage", a.stage},
              {"input_kind", options.kind == InputKind::chat ? "chat" : "raw"},
              {"positive_rate", a.positive_rate},
              {"negative_rate", a.negative_rate},
              {"window", a.window},
              {"max_span", a.max_span},
              {"seed", a.seed},
              {"cap", a.cap ? ordered(*a.cap) : ordered(nullptr)},
              {"workers", a.workers},
              {"shards", a.shards},
              {"proposal", a.proposal},
              {"stopwords", a.stopwords},
              {"lexicon", a.lexicon}};
  m.inputs = {input, a.stopwords, a.lexicon};
  m.outputs = {output, summary_path};
  write_manifest(with_suffix(output, ".manifest.json"), m);

  out << "converted " << summary.documents << " documents: " << summary.instances_positive
      << " positive, " << summary.instances_negative << " negative instances"
      << (summary.capped ? " (capped)" : "") << "\n";
  if (summary.failed_documents > 0) {
    err << "warning: " << summary.failed_documents << " records failed; first: "
        << summary.first_error << "\n";
  }
  if (summary.skipped_records > 0) {
    err << "warning: " << summary.skipped_records << " chat records lack a user or assistant turn\n";
  }
  return kExitOk;
}

// ---- stats ---------------------------------------------------------------

struct StatsArgs {
  std::string input;
  std::string summary;
  std::string format = "human";
  std::optional<std::string> output;
  bool approximate = false;
};

int do_stats(const StatsArgs& a, const std::vector<std::string>& argv, std::ostream& out) {
  const fs::path input = a.input;
  const fs::path summary_path = a.summary.empty() ? with_suffix(input, ".summary.json") : fs::path(a.summary);
  std::ifstream s(summary_path);
  if (!s) throw DataError("cannot open conversion summary " + summary_path.string());
  std::stringstream text;
  text << s.rdbuf();
  const ConversionSummary summary = ConversionSummary::from_json(text.str());
  const CorpusReport report = compute_report(input, summary, a.approximate);
  const ReportFormat format = a.format == "machine" ? ReportFormat::machine : ReportFormat::human;
  std::optional<fs::path> output;
  if (a.output) output = *a.output;
  write_text(output, ensure_newline(render_report(report, format)), out);

  Manifest m;
  m.subcommand = "stats";
  m.argv = argv;
  m.config = {{"format", a.format}, {"approximate", a.approximate}};
  m.inputs = {input, summary_path};
  if (output) m.outputs = {*output};
  write_manifest(output ? with_suffix(*output, ".manifest.json") : with_suffix(input, ".stats.manifest.json"), m);
  return kExitOk;
}

// ---- render --------------------------------------------------------------

struct RenderArgs {
  std::string input;
  std::string output;
  std::string kind = "entity";
  std::string templates = kDataDir + "/templates.txt";
  std::vector<std::string> labels;
  std::optional<std::string> demos;
  std::size_t shots = 0;
  bool no_gold = false;
  std::optional<std::string> gold_preds;
};

int do_render(const RenderArgs& a, const std::vector<std::string>& argv, std::ostream& out) {
  const TemplateLibrary library = TemplateLibrary::load(a.templates);
  TemplateKind kind;
  try {
    kind = parse_template_kind(a.kind);
  } catch (const DataError& e) {
    throw UsageError(std::string("--kind: ") + e.what());
  }
  const TaskTemplate& tmpl = library.get(kind);
  const fs::path input = a.input;
  const fs::path output = a.output;
  if (a.shots > 0 && !a.demos) throw UsageError("--shots needs --demos");

  std::vector<RenderedRecord> rendered;
  if (is_entity_kind(kind)) {
    const auto records = read_entities(input);
    std::vector<std::string> labels = a.labels;
    if (labels.empty()) {
      std::set<std::string> seen;
      for (const auto& r : records) {
        for (const auto& e : r.entities) {
          if (e.scoring) seen.insert(e.label);
        }
      }
      labels.assign(seen.begin(), seen.end());
    }
    std::vector<GoldEntityRecord> demo_records;
    if (a.demos) demo_records = read_entities(*a.demos);
    if (demo_records.size() > a.shots) demo_records.resize(a.shots);

    auto render_one = [&](const GoldEntityRecord& rec, const std::string& label) {
      TemplateSlots slots;
      slots.context_tokens = rec.tokens;
      slots.label = label_text(label);
      slots.instruction = rec.instruction;
      RenderedInstance inst = render(tmpl, slots);
      std::vector<TokenRange> spans;
      std::vector<std::string> answers;
      for (const auto& e : rec.entities) {
        if (e.label != label) continue;
        spans.push_back({e.start, e.end});
        answers.push_back(join_tokens(rec.tokens, e.start, e.end));
      }
      inst.gold_tags = align_gold_spans(inst, spans);
      return std::make_pair(std::move(inst), std::move(answers));
    };

    for (const auto& rec : records) {
      for (const auto& label : labels) {
        auto [inst, answers] = render_one(rec, label);
        if (!demo_records.empty()) {
          std::vector<Demonstration> demos;
          for (const auto& d : demo_records) {
            auto [demo, demo_answers] = render_one(d, label);
            demo.gold_tags.reset();
            demos.push_back({std::move(demo), std::move(demo_answers)});
          }
          inst = compose_in_context(demos, inst, a.shots);
        }
        rendered.push_back({rec.doc_id, kind, label, std::move(inst)});
      }
    }
  } else if (kind == TemplateKind::query || kind == TemplateKind::instruction_query) {
    const auto records = read_mrc(input);
    std::vector<GoldMRCRecord> demo_records;
    if (a.demos) demo_records = read_mrc(*a.demos);
    if (demo_records.size() > a.shots) demo_records.resize(a.shots);
    auto render_one = [&](const GoldMRCRecord& rec) {
      TemplateSlots slots;
      slots.context = rec.context;
      slots.question = rec.question;
      slots.instruction = rec.instruction;
      RenderedInstance inst = render(tmpl, slots);
      inst.gold_tags = align_gold_answers(inst, rec.answers);
      return inst;
    };
    for (const auto& rec : records) {
      RenderedInstance inst = render_one(rec);
      if (!demo_records.empty()) {
        std::vector<Demonstration> demos;
        for (const auto& d : demo_records) {
          RenderedInstance demo = render_one(d);
          demo.gold_tags.reset();
          std::vector<std::string> answers;
          if (!d.answers.empty()) answers.push_back(d.answers.front());
          demos.push_back({std::move(demo), std::move(answers)});
        }
        inst = compose_in_context(demos, inst, a.shots);
      }
      rendered.push_back({rec.doc_id, kind, std::nullopt, std::move(inst)});
    }
  } else {
    throw UsageError("the render subcommand handles entity and query kinds; " + a.kind +
                     " is available through the library");
  }

  std::optional<JsonlWriter> preds;
  if (a.gold_preds) preds.emplace(*a.gold_preds);
  JsonlWriter writer(output);
  for (auto& rec : rendered) {
    if (preds) preds->write_line(to_jsonl(prediction_from_tags(rec, *rec.instance.gold_tags)));
    if (a.no_gold) rec.instance.gold_tags.reset();
    writer.write_line(to_jsonl(rec));
  }
  writer.flush();
  if (preds) preds->flush();

  Manifest m;
  m.subcommand = "render";
  m.argv = argv;
  m.config = {{"kind", a.kind}, {"templates", a.templates}, {"labels", a.labels},
              {"demos", a.demos ? ordered(*a.demos) : ordered(nullptr)},
              {"shots", a.shots}, {"no_gold", a.no_gold}};
  m.inputs = {input, a.templates};
  if (a.demos) m.inputs.push_back(*a.demos);
  m.outputs = {output};
  if (a.gold_preds) m.outputs.push_back(*a.gold_preds);
  write_manifest(with_suffix(output, ".manifest.json"), m);
  out << "rendered " << rendered.size() << " prompts\n";
  return kExitOk;
}

// ---- bench-build ---------------------------------------------------------

struct BenchArgs {
  std::string input;
  std::string output;
  std::string transform;
  std::string rule = "concise";
  std::string preset;
  std::vector<std::string> merge_labels;
  std::optional<std::string> instruction;
  std::optional<std::string> target_label;
  std::optional<std::string> judge_endpoint;
  std::string judge_model = "gpt-4o";
  std::optional<std::string> judge_script;
  bool judge_all_yes = false;
  std::size_t judge_concurrency = 4;
  int judge_retries = 4;
  int reply_retries = 1;
  std::optional<std::string> audit;
  bool resume = false;
};

int do_bench(const BenchArgs& a, const std::vector<std::string>& argv, std::ostream& out,
             std::ostream& err) {
  const fs::path input = a.input;
  const fs::path output = a.output;
  Manifest m;
  m.subcommand = "bench-build";
  m.argv = argv;
  m.inputs = {input};
  m.outputs = {output};
  m.config = {{"transform", a.transform}};

  if (a.transform == "preference") {
    PreferenceRule rule = preference_rule(parse_preference(a.rule));
    if (a.instruction) rule.instruction_text = *a.instruction;
    JsonlWriter writer(output);
    std::size_t n = 0;
    for (const auto& rec : read_mrc(input)) {
      if (rec.answers.empty()) {
        GoldMRCRecord copy = rec;
        copy.instruction = rule.instruction_text;
        writer.write_line(to_jsonl(copy));
      } else {
        writer.write_line(to_jsonl(apply_preference(rec, rule)));
      }
      ++n;
    }
    writer.flush();
    m.config["rule"] = a.rule;
    m.config["instruction"] = rule.instruction_text;
    out << "preference (" << a.rule << "): " << n << " records\n";
  } else if (a.transform == "miscellaneous") {
    MiscPreset preset;
    if (!a.preset.empty()) preset = misc_preset(a.preset);
    if (!a.merge_labels.empty()) preset.merge_labels = a.merge_labels;
    if (a.instruction) preset.instruction = *a.instruction;
    if (preset.instruction.empty()) throw UsageError("miscellaneous needs --preset or --instruction");
    const MiscResult result = build_miscellaneous(read_entities(input), preset.merge_labels, preset.instruction);
    JsonlWriter writer(output);
    for (const auto& rec : result.records) writer.write_line(to_jsonl(rec));
    writer.flush();
    for (const auto& missing : result.missing_labels) {
      err << "warning: merge label " << missing << " does not occur in the input\n";
    }
    m.config["preset"] = a.preset;
    m.config["merge_labels"] = preset.merge_labels;
    m.config["instruction"] = preset.instruction;
    out << "miscellaneous: " << result.records.size() << " records, "
        << result.missing_labels.size() << " missing merge labels\n";
  } else if (a.transform == "disambiguation") {
    DisambiguationOptions options;
    if (!a.preset.empty()) {
      const auto preset = disambiguation_preset(a.preset);
      options.target_label = preset.target_label;
      options.instruction = preset.instruction;
    }
    if (a.target_label) options.target_label = *a.target_label;
    if (a.instruction) options.instruction = *a.instruction;
    if (options.target_label.empty() || options.instruction.empty()) {
      throw UsageError("disambiguation needs --preset or --target-label and --instruction");
    }
    options.reply_retries = a.reply_retries;
    options.concurrency = a.judge_concurrency;
    options.audit_path = a.audit ? fs::path(*a.audit) : with_suffix(output, ".audit.jsonl");
    options.resume = a.resume;

    std::unique_ptr<JudgeClient> judge;
    std::string judge_name;
    std::optional<std::string> endpoint = a.judge_endpoint;
    if (!endpoint) {
      if (const char* env = std::getenv("NTE_JUDGE_ENDPOINT")) endpoint = env;
    }
    if (a.judge_all_yes) {
      judge = std::make_unique<AllYesJudge>();
      judge_name = "all-yes";
    } else if (a.judge_script) {
      judge = std::make_unique<ScriptedJudge>(ScriptedJudge::load(*a.judge_script));
      judge_name = "script";
      m.inputs.push_back(*a.judge_script);
    } else if (endpoint) {
      HttpJudgeConfig cfg;
      cfg.endpoint = *endpoint;
      cfg.model = a.judge_model;
      if (const char* key = std::getenv("NTE_JUDGE_KEY")) cfg.api_key = key;
      cfg.max_retries = a.judge_retries;
      judge = std::make_unique<HttpJudgeClient>(cfg);
      judge_name = "http";
    } else {
      throw UsageError("disambiguation needs --judge-endpoint, --judge-script or --judge-all-yes");
    }

    DisambiguationStats stats;
    const auto result = filter_disambiguation(read_entities(input), options, *judge, &stats);
    JsonlWriter writer(output);
    for (const auto& rec : result) writer.write_line(to_jsonl(rec));
    writer.flush();
    m.config["target_label"] = options.target_label;
    m.config["instruction"] = options.instruction;
    m.config["judge"] = judge_name;
    m.config["judge_model"] = judge->model();
    m.config["judge_endpoint"] = endpoint ? ordered(*endpoint) : ordered(nullptr);
    m.config["reply_retries"] = a.reply_retries;
    m.outputs.push_back(options.audit_path);
    out << "disambiguation: judged " << stats.judged << ", reused " << stats.reused << ", kept "
        << stats.kept << ", dropped " << stats.dropped << ", flagged " << stats.flagged << "\n";
  } else {
    throw UsageError("unknown transform " + a.transform +
                     " (preference, miscellaneous, disambiguation)");
  }
  write_manifest(with_suffix(output, ".manifest.json"), m);
  return kExitOk;
}

// ---- evaluate ------------------------------------------------------------

struct EvalArgs {
  std::string task;
  std::vector<std::string> files;
  std::vector<std::string> labels;
  std::string format = "human";
  std::optional<std::string> output;
};

int do_evaluate(const EvalArgs& a, const std::vector<std::string>& argv, std::ostream& out) {
  auto need = [&](std::size_t n, const char* usage) {
    if (a.files.size() != n) throw UsageError(std::string("evaluate --task ") + a.task + " expects " + usage);
  };
  ScoreReport report;
  if (a.task == "ner") {
    need(2, "GOLD PREDS");
    const std::set<std::string> only(a.labels.begin(), a.labels.end());
    report = entity_micro_f1(read_entities(a.files[0]), read_predictions(a.files[1]), only);
  } else if (a.task == "mrc") {
    need(2, "GOLD PREDS");
    report = mrc_word_f1(read_mrc(a.files[0]), read_predictions(a.files[1]));
  } else if (a.task == "anssim") {
    need(2, "PREDS_A PREDS_B");
    report = ans_sim(answers_by_id(read_predictions(a.files[0])),
                     answers_by_id(read_predictions(a.files[1])));
  } else if (a.task == "dualem") {
    need(4, "GOLD_LONG GOLD_SHORT PREDS_LONG PREDS_SHORT");
    report = dual_em(answers_by_id(read_predictions(a.files[2])),
                     answers_by_id(read_predictions(a.files[3])), read_mrc(a.files[0]),
                     read_mrc(a.files[1]));
  } else {
    throw UsageError("unknown task " + a.task + " (ner, mrc, anssim, dualem)");
  }
  const ScoreFormat format = a.format == "machine" ? ScoreFormat::machine : ScoreFormat::human;
  std::optional<fs::path> output;
  if (a.output) output = *a.output;
  write_text(output, ensure_newline(render_score(report, format)), out);

  Manifest m;
  m.subcommand = "evaluate";
  m.argv = argv;
  m.config = {{"task", a.task}, {"labels", a.labels}, {"format", a.format}};
  for (const auto& f : a.files) m.inputs.emplace_back(f);
  if (output) m.outputs = {*output};
  const fs::path manifest = output ? with_suffix(*output, ".manifest.json")
                                   : with_suffix(a.files.back(), ".eval.manifest.json");
  write_manifest(manifest, m);
  return kExitOk;
}

// ---- replay --------------------------------------------------------------

int do_replay(const std::string& manifest_path, bool verify, std::ostream& out, std::ostream& err) {
  std::ifstream in(manifest_path);
  if (!in) throw DataError("cannot open manifest " + manifest_path);
  nlohmann::json manifest = nlohmann::json::parse(in, nullptr, false);
  if (manifest.is_discarded() || !manifest.contains("argv")) {
    throw DataError("malformed manifest " + manifest_path);
  }
  const auto argv = manifest.at("argv").get<std::vector<std::string>>();
  if (!argv.empty() && argv.front() == "replay") throw DataError("manifest records a replay");
  const fs::path previous_cwd = fs::current_path();
  const fs::path cwd = manifest.value("cwd", previous_cwd.string());
  fs::current_path(cwd);
  struct Restore {
    fs::path path;
    ~Restore() {
      std::error_code ec;
      fs::current_path(path, ec);
    }
  } restore{previous_cwd};

  for (const auto& [path, digest] : manifest.at("inputs").items()) {
    if (sha256_file(path) != digest.get<std::string>()) {
      throw DataError("input " + path + " changed since the manifest was written");
    }
  }
  const int code = run(argv, out, err);
  if (code != kExitOk || !verify) return code;
  std::size_t mismatches = 0;
  for (const auto& [path, digest] : manifest.at("outputs").items()) {
    if (sha256_file(path) != digest.get<std::string>()) {
      err << "output differs: " << path << "\n";
      ++mismatches;
    }
  }
  if (mismatches > 0) return kExitData;
  out << "replay verified: " << manifest.at("outputs").size() << " outputs identical\n";
  return kExitOk;
}

}  // namespace

std::string version() { return NTEKIT_VERSION; }

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Next-tokens-extraction corpus and benchmark toolkit", "ntekit"};
  app.set_version_flag("--version", version());
  app.set_config("--config", "", "TOML/INI file with option defaults; flags override it");
  app.require_subcommand(1);

  ConvertArgs conv;
  auto* convert = app.add_subcommand("convert", "Mine NTE instances from raw or chat text");
  convert->add_option("input", conv.input, "raw or chat JSONL")->required();
  convert->add_option("output", conv.output, "nte.jsonl to write")->required();
  convert->add_option("--stage", conv.stage)->check(CLI::IsMember({"pretrain", "posttrain"}))->capture_default_str();
  convert->add_option("--input-kind", conv.input_kind)->check(CLI::IsMember({"auto", "raw", "chat"}))->capture_default_str();
  convert->add_option("--positive-rate", conv.positive_rate)->check(CLI::Range(0.0, 1.0))->capture_default_str();
  convert->add_option("--negative-rate", conv.negative_rate)->check(CLI::Range(0.0, 1.0))->capture_default_str();
  convert->add_option("--window", conv.window)->check(CLI::PositiveNumber)->capture_default_str();
  convert->add_option("--max-span", conv.max_span)->check(CLI::PositiveNumber)->capture_default_str();
  convert->add_option("--seed", conv.seed)->capture_default_str();
  convert->add_option("--cap", conv.cap, "stop emitting after this many instances");
  convert->add_option("--workers", conv.workers)->check(CLI::PositiveNumber)->capture_default_str();
  convert->add_option("--shards", conv.shards, "convert as N contiguous shards, then concatenate")
      ->check(CLI::PositiveNumber)->capture_default_str();
  convert->add_option("--proposal", conv.proposal)->check(CLI::IsMember({"heuristic", "external"}))->capture_default_str();
  convert->add_option("--stopwords", conv.stopwords)->capture_default_str();
  convert->add_option("--lexicon", conv.lexicon)->capture_default_str();
  convert->add_option("--summary", conv.summary, "default: OUTPUT.summary.json");

  StatsArgs st;
  auto* stats = app.add_subcommand("stats", "Corpus statistics over nte.jsonl");
  stats->add_option("input", st.input)->required();
  stats->add_option("--summary", st.summary, "default: INPUT.summary.json");
  stats->add_option("--format", st.format)->check(CLI::IsMember({"human", "machine"}))->capture_default_str();
  stats->add_option("-o,--output", st.output);
  stats->add_flag("--approximate", st.approximate, "count unique spans with a HyperLogLog sketch");

  RenderArgs rd;
  auto* rendercmd = app.add_subcommand("render", "Render a benchmark into prompts");
  rendercmd->add_option("input", rd.input, "CoNLL or entity JSONL for entity kinds, MRC JSONL for query kinds")->required();
  rendercmd->add_option("output", rd.output, "rendered.jsonl")->required();
  rendercmd->add_option("--kind", rd.kind)->capture_default_str();
  rendercmd->add_option("--templates", rd.templates)->capture_default_str();
  rendercmd->add_option("--labels", rd.labels, "entity labels to prompt for (default: all scoring labels)")->delimiter(',');
  rendercmd->add_option("--demos", rd.demos, "records used as in-context demonstrations");
  rendercmd->add_option("--shots", rd.shots)->capture_default_str();
  rendercmd->add_flag("--no-gold", rd.no_gold);
  rendercmd->add_option("--gold-preds", rd.gold_preds, "also write preds.jsonl decoded from the gold tags");

  BenchArgs bb;
  auto* bench = app.add_subcommand("bench-build", "Build an instruction-following benchmark");
  bench->add_option("input", bb.input)->required();
  bench->add_option("output", bb.output)->required();
  bench->add_option("--transform", bb.transform)->required()
      ->check(CLI::IsMember({"preference", "miscellaneous", "disambiguation"}));
  bench->add_option("--rule", bb.rule)->check(CLI::IsMember({"longest", "shortest", "concise"}))->capture_default_str();
  bench->add_option("--preset", bb.preset);
  bench->add_option("--merge-labels", bb.merge_labels)->delimiter(',');
  bench->add_option("--instruction", bb.instruction);
  bench->add_option("--target-label", bb.target_label);
  bench->add_option("--judge-endpoint", bb.judge_endpoint, "chat-completions URL (or NTE_JUDGE_ENDPOINT); key from NTE_JUDGE_KEY");
  bench->add_option("--judge-model", bb.judge_model)->capture_default_str();
  bench->add_option("--judge-script", bb.judge_script, "scripted offline judge");
  bench->add_flag("--judge-all-yes", bb.judge_all_yes, "offline judge that keeps everything");
  bench->add_option("--judge-concurrency", bb.judge_concurrency)->check(CLI::PositiveNumber)->capture_default_str();
  bench->add_option("--judge-retries", bb.judge_retries)->check(CLI::NonNegativeNumber)->capture_default_str();
  bench->add_option("--reply-retries", bb.reply_retries)->check(CLI::NonNegativeNumber)->capture_default_str();
  bench->add_option("--audit", bb.audit, "default: OUTPUT.audit.jsonl");
  bench->add_flag("--resume", bb.resume, "reuse decisions from an existing audit log");

  EvalArgs ev;
  auto* evaluate = app.add_subcommand("evaluate", "Score predictions");
  evaluate->add_option("--task", ev.task)->required()->check(CLI::IsMember({"ner", "mrc", "anssim", "dualem"}));
  evaluate->add_option("files", ev.files, "gold and prediction files")->required();
  evaluate->add_option("--labels", ev.labels, "only score these entity labels")->delimiter(',');
  evaluate->add_option("--format", ev.format)->check(CLI::IsMember({"human", "machine"}))->capture_default_str();
  evaluate->add_option("-o,--output", ev.output);

  std::string manifest_path;
  bool verify = false;
  auto* replay = app.add_subcommand("replay", "Re-run the command recorded in a manifest");
  replay->add_option("manifest", manifest_path)->required();
  replay->add_flag("--verify", verify, "fail unless every recorded output is reproduced");

  std::vector<std::string> storage;
  storage.reserve(args.size() + 1);
  storage.emplace_back("ntekit");
  storage.insert(storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& s : storage) argv.push_back(s.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*convert) return do_convert(conv, args, out, err);
    if (*stats) return do_stats(st, args, out);
    if (*rendercmd) return do_render(rd, args, out);
    if (*bench) return do_bench(bb, args, out, err);
    if (*evaluate) return do_evaluate(ev, args, out);
    if (*replay) return do_replay(manifest_path, verify, out, err);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ServiceError& e) {
    err << "service error: " << e.what() << "\n";
    return kExitService;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace ntekit::cli
