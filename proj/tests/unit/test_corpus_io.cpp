#include <doctest.h>
#include <sys/resource.h>

#include <random>

#include "ntekit/corpus_io.hpp"
#include "ntekit/digest.hpp"
#include "unit/support.hpp"

using namespace ntekit;

namespace {

std::string error_of(auto&& fn) {
  try {
    fn();
  } catch (const DataError& e) {
    return e.what();
  }
  return "";
}

long peak_rss_kb() {
  rusage usage{};
  getrusage(RUSAGE_SELF, &usage);
  return usage.ru_maxrss;
}

}  // namespace

TEST_SUITE("corpus_io") {

TEST_CASE("raw line maps fields") {
  auto rec = parse_raw_line(R"({"id":"d1","text":"a b a b"})", 1);
  CHECK(rec == RawTextRecord{"d1", "a b a b", std::nullopt});
  auto with_spans = parse_raw_line(R"({"id":"d2","text":"x y z","spans":[[0,2]]})", 1);
  REQUIRE(with_spans.spans);
  CHECK(*with_spans.spans == std::vector<TokenRange>{{0, 2}});
}

TEST_CASE("raw line errors name line and field") {
  CHECK(error_of([] { parse_raw_line(R"({"id":"d1"})", 1); }) == "line 1: missing field text");
  CHECK(error_of([] { parse_raw_line(R"({"id":"d1","text":3})", 7) ; }) ==
        "line 7: field text must be a string");
  CHECK(error_of([] { parse_raw_line("{oops", 4); }).starts_with("line 4:"));
  CHECK(error_of([] { parse_raw_line(R"({"id":"","text":""})", 2); }) == "line 2: empty id");
}

TEST_CASE("empty file is an empty stream") {
  TempDir dir;
  write_file(dir / "empty.jsonl", "");
  RawJsonlReader reader(dir / "empty.jsonl");
  CHECK_FALSE(reader.next());
}

TEST_CASE("chat records") {
  auto rec = parse_chat_line(
      R"({"id":"c1","turns":[{"role":"user","text":"Who won? Tom won."},{"role":"assistant","text":"Tom"}]})",
      1);
  REQUIRE(rec);
  CHECK(rec->turns.size() == 2);
  CHECK(rec->turns[1] == ChatTurn{Role::assistant, "Tom"});

  CHECK(error_of([] {
          parse_chat_line(R"({"id":"c1","turns":[{"role":"system","text":"x"}]})", 1);
        }) == "line 1: unknown role system");

  TempDir dir;
  write_file(dir / "chat.jsonl",
             R"({"id":"c1","turns":[{"role":"user","text":"hi"}]})"
             "\n"
             R"({"id":"c2","turns":[{"role":"user","text":"hi"},{"role":"assistant","text":"yo"}]})"
             "\n");
  ChatJsonlReader reader(dir / "chat.jsonl");
  auto first = reader.next();
  REQUIRE(first);
  CHECK(first->doc_id == "c2");
  CHECK_FALSE(reader.next());
  CHECK(reader.skipped() == 1);
}

TEST_CASE("conll reader and lenient repair") {
  TempDir dir;
  write_file(dir / "a.conll",
             "-DOCSTART- -X- -X- O\n\nTom NNP B-PER\nran VBD O\n\nNew NNP B-LOC\nYork NNP I-LOC\n\n");
  ConllReader reader(dir / "a.conll");
  auto s0 = reader.next();
  auto s1 = reader.next();
  REQUIRE(s0);
  REQUIRE(s1);
  CHECK(s0->doc_id == "0");
  CHECK(s0->entities == std::vector<EntitySpan>{{"PER", 0, 1, true}});
  CHECK(s1->entities == std::vector<EntitySpan>{{"LOC", 0, 2, true}});
  CHECK_FALSE(reader.next());
  CHECK(reader.repairs() == 0);

  // Stray I-PER opening the sentence, then a type switch inside a run.
  write_file(dir / "b.conll", "Tom I-PER\nran O\nfast O\n\nA B-ORG\nB I-LOC\nC I-LOC\n");
  ConllReader lenient(dir / "b.conll");
  auto r0 = lenient.next();
  CHECK(r0->entities == std::vector<EntitySpan>{{"PER", 0, 1, true}});
  CHECK(lenient.repairs() == 1);
  auto r1 = lenient.next();
  CHECK(r1->entities == std::vector<EntitySpan>{{"ORG", 0, 1, true}, {"LOC", 1, 3, true}});
  CHECK(lenient.repairs() == 2);
}

TEST_CASE("repair counter equals malformed transitions") {
  std::mt19937_64 rng(7);
  const std::vector<std::string> alphabet = {"O", "B-A", "I-A", "B-B", "I-B"};
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<std::string> tags(rng() % 30);
    for (auto& t : tags) t = alphabet[rng() % alphabet.size()];
    std::size_t expected = 0;
    for (std::size_t i = 0; i < tags.size(); ++i) {
      if (tags[i][0] != 'I') continue;
      const bool continues = i > 0 && tags[i - 1] != "O" && tags[i - 1].substr(2) == tags[i].substr(2);
      expected += continues ? 0 : 1;
    }
    std::size_t repairs = 0;
    entities_from_bio(tags, repairs);
    CHECK(repairs == expected);
  }
}

TEST_CASE("records round-trip through their readers") {
  RawTextRecord raw{"d1", "Tom said \"hi\"\tand left.", std::vector<TokenRange>{{0, 1}, {3, 5}}};
  CHECK(parse_raw_line(to_jsonl(raw), 1) == raw);

  ChatRecord chat{"c9", {{Role::user, "q?"}, {Role::assistant, "a."}, {Role::user, "ü"}}};
  CHECK(parse_chat_line(to_jsonl(chat), 1) == chat);

  GoldMRCRecord mrc{"m1", "Tom lives in Oslo.", "Where?", {"Oslo", "in Oslo"}, "Give a concise answer"};
  CHECK(parse_mrc_line(to_jsonl(mrc), 1) == mrc);
  GoldMRCRecord unanswerable{"m2", "ctx", "q", {}, std::nullopt};
  CHECK(parse_mrc_line(to_jsonl(unanswerable), 1) == unanswerable);

  GoldEntityRecord ent{"e1", {"New", "York", "rocks"}, {{"LOC", 0, 2, true}, {"MISC", 2, 3, false}},
                       std::nullopt};
  CHECK(parse_entity_line(to_jsonl(ent), 1) == ent);

  NTEInstance inst{"doc", Stage::posttrain, Polarity::positive, {"the", "cat", "sat", "."},
                   {Tag::B, Tag::I, Tag::O, Tag::O}, {"the", "cat"}, {{4, 0, 2}}};
  CHECK(parse_nte_line(to_jsonl(inst), 1) == inst);
}

TEST_CASE("conll serialization round-trips") {
  TempDir dir;
  GoldEntityRecord ent{"0", {"Ada", "Lovelace", "met", "Babbage"},
                       {{"PER", 0, 2, true}, {"PER", 3, 4, true}}, std::nullopt};
  write_file(dir / "x.conll", to_conll(ent));
  ConllReader reader(dir / "x.conll");
  auto back = reader.next();
  REQUIRE(back);
  CHECK(*back == ent);
}

TEST_CASE("nte writer is deterministic and empty streams give empty files") {
  TempDir dir;
  std::vector<NTEInstance> insts = {
      {"a", Stage::pretrain, Polarity::negative, {"x"}, {Tag::O}, {"y"}, {}},
      {"b", Stage::pretrain, Polarity::positive, {"y"}, {Tag::B}, {"y"}, {{1, 0, 1}}},
  };
  write_nte_jsonl(insts, dir / "one.jsonl");
  write_nte_jsonl(insts, dir / "two.jsonl");
  CHECK(sha256_file(dir / "one.jsonl") == sha256_file(dir / "two.jsonl"));
  NteJsonlReader reader(dir / "one.jsonl");
  CHECK(*reader.next() == insts[0]);
  CHECK(*reader.next() == insts[1]);

  write_nte_jsonl({}, dir / "empty.jsonl");
  CHECK(std::filesystem::file_size(dir / "empty.jsonl") == 0);
}

TEST_CASE("unwritable path is a DataError") {
  CHECK_THROWS_AS(JsonlWriter("/nonexistent-dir/x/y.jsonl"), DataError);
}

TEST_CASE("validation") {
  GoldEntityRecord bad{"e", {"a"}, {{"PER", 0, 2, true}}, std::nullopt};
  CHECK_THROWS_AS(validate(bad), DataError);
  GoldEntityRecord overlap{"e", {"a", "b"}, {{"PER", 0, 2, true}, {"PER", 1, 2, true}}, std::nullopt};
  CHECK_THROWS_AS(validate(overlap), DataError);
  GoldEntityRecord typed{"e", {"a", "b"}, {{"PER", 0, 2, true}, {"ORG", 1, 2, true}}, std::nullopt};
  CHECK_NOTHROW(validate(typed));
  GoldMRCRecord missing{"m", "abc", "q", {"zzz"}, std::nullopt};
  CHECK_THROWS_AS(validate(missing), DataError);
}

TEST_CASE("streaming memory is bounded by the record, not the file") {
  TempDir dir;
  const auto path = dir / "big.jsonl";
  {
    JsonlWriter out(path);
    std::string text(40, 'w');
    for (std::size_t i = 0; i < 1'000'000; ++i) {
      out.write_line(to_jsonl(RawTextRecord{"d" + std::to_string(i), text, std::nullopt}));
    }
  }
  const auto file_kb = static_cast<long>(std::filesystem::file_size(path) / 1024);
  const long before = peak_rss_kb();
  RawJsonlReader reader(path);
  std::size_t count = 0;
  while (reader.next()) ++count;
  CHECK(count == 1'000'000);
  const long growth = peak_rss_kb() - before;
  CHECK(file_kb > 50'000);
  CHECK(growth < 16 * 1024);
}

}  // TEST_SUITE
