#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <random>

#include "csrl/corpus.hpp"
#include "doctest.h"
#include "helpers.hpp"

using namespace csrl::corpus;
using testutil::TempDir;
using testutil::write_file;

namespace {

std::vector<std::string> tag_names(const TagSequence& seq,
                                   const LabelInventory& inv) {
  std::vector<std::string> out;
  for (int t : seq.tags) out.push_back(inv.tag_name(t));
  return out;
}

}  // namespace

TEST_CASE("label inventory tag layout") {
  LabelInventory inv;
  CHECK(inv.role_count() == 8);
  CHECK(inv.tag_count() == 17);
  CHECK(inv.roles()[0] == "ARG0");
  CHECK(inv.roles()[4] == "ARG4");
  CHECK(inv.roles()[5] == "ARG-LOC");
  CHECK(inv.roles()[6] == "ARG-TMP");
  CHECK(inv.roles()[7] == "ARG-PRP");
  CHECK(inv.tag_name(0) == "O");
  CHECK(inv.tag_name(1) == "B-ARG0");
  CHECK(inv.tag_name(2) == "I-ARG0");
  CHECK(inv.tag_name(15) == "B-ARG-PRP");
  CHECK(inv.tag_name(16) == "I-ARG-PRP");
  for (int tag = 1; tag < inv.tag_count(); ++tag) {
    int role = inv.role_of_tag(tag);
    if (inv.is_begin(tag)) CHECK(inv.begin_tag(role) == tag);
    if (inv.is_inside(tag)) CHECK(inv.inside_tag(role) == tag);
  }
  CHECK(inv.role_id("ARG-TMP") == 6);
  CHECK(inv.role_id("ARGM-MNR") == -1);
  CHECK_THROWS_AS(LabelInventory(std::vector<std::string>{}), DataError);
  CHECK_THROWS_AS(LabelInventory({"ARG0", "ARG0"}), DataError);
}

TEST_CASE("bio encode: single span covering tokens 2-4 of 6") {
  // One context of six words, one ARG0 argument on words 2..4.
  Dialogue d = testutil::make_dialogue(1, 6);
  Frame f;
  f.predicate = {0, 0, 0};
  f.arguments.push_back({{0, 2, 4}, "ARG0"});
  LabelInventory inv;
  TagSequence tags = bio_encode(f, d, inv);
  CHECK(tag_names(tags, inv) ==
        std::vector<std::string>{"O", "O", "B-ARG0", "I-ARG0", "I-ARG0", "O"});
}

TEST_CASE("bio encode: adjacent spans") {
  Dialogue d = testutil::make_dialogue(1, 3);
  Frame f;
  f.predicate = {0, 0, 0};
  f.arguments.push_back({{0, 0, 0}, "ARG0"});
  f.arguments.push_back({{0, 1, 2}, "ARG1"});
  LabelInventory inv;
  CHECK(tag_names(bio_encode(f, d, inv), inv) ==
        std::vector<std::string>{"B-ARG0", "B-ARG1", "I-ARG1"});
}

TEST_CASE("bio encode: no arguments is all O") {
  Dialogue d = testutil::make_dialogue(2, 3);
  Frame f;
  f.predicate = {1, 1, 1};
  LabelInventory inv;
  TagSequence tags = bio_encode(f, d, inv);
  CHECK(tags.tags == std::vector<int>(6, LabelInventory::kOutside));
}

TEST_CASE("bio encode: overlapping arguments rejected") {
  Dialogue d = testutil::make_dialogue(1, 6);
  Frame f;
  f.predicate = {0, 5, 5};
  f.arguments.push_back({{0, 0, 2}, "ARG0"});
  f.arguments.push_back({{0, 2, 3}, "ARG1"});
  CHECK_THROWS_AS(bio_encode(f, d, LabelInventory()), DataError);
}

TEST_CASE("bio encode: multi-utterance flattening and window offset") {
  // Three utterances of 2 tokens; argument in utterance 0, predicate in 2.
  Dialogue d = testutil::make_dialogue(3, 2);
  Frame f;
  f.predicate = {2, 0, 0};
  f.arguments.push_back({{0, 1, 1}, "ARG1"});
  f.arguments.push_back({{2, 1, 1}, "ARG0"});
  LabelInventory inv;
  TagSequence full = bio_encode(f, d, inv, 0);
  CHECK(tag_names(full, inv) ==
        std::vector<std::string>{"O", "B-ARG1", "O", "O", "O", "B-ARG0"});
  // Truncated window starting at utterance 1 drops the early argument.
  TagSequence window = bio_encode(f, d, inv, 1);
  CHECK(tag_names(window, inv) ==
        std::vector<std::string>{"O", "O", "O", "B-ARG0"});
}

TEST_CASE("bio decode: basic and repair policy") {
  LabelInventory inv;
  SUBCASE("all O decodes to nothing") {
    TagSequence t{std::vector<int>(5, 0)};
    CHECK(bio_decode(t, inv).empty());
  }
  SUBCASE("B,I,O decodes to one span") {
    TagSequence t{{inv.begin_tag(1), inv.inside_tag(1), 0}};
    auto spans = bio_decode(t, inv);
    REQUIRE(spans.size() == 1);
    CHECK(spans[0] == FlatSpan{0, 1, 1});
  }
  SUBCASE("orphan inside tags are repaired to a begin") {
    // O, I-ARG2, I-ARG2 -> one ARG2 span over [1,2].
    TagSequence t{{0, inv.inside_tag(2), inv.inside_tag(2)}};
    auto spans = bio_decode(t, inv);
    REQUIRE(spans.size() == 1);
    CHECK(spans[0] == FlatSpan{1, 2, 2});
  }
  SUBCASE("role change inside a run splits the span") {
    TagSequence t{{inv.begin_tag(0), inv.inside_tag(1)}};
    auto spans = bio_decode(t, inv);
    REQUIRE(spans.size() == 2);
    CHECK(spans[0] == FlatSpan{0, 0, 0});
    CHECK(spans[1] == FlatSpan{1, 1, 1});
  }
}

TEST_CASE("bio round trip on randomized span sets") {
  LabelInventory inv;
  std::mt19937_64 rng(20240816);
  int nonempty = 0;
  for (int iter = 0; iter < 1000; ++iter) {
    int length = 1 + static_cast<int>(rng() % 40);
    auto spans = testutil::random_flat_spans(rng, length, inv);
    if (!spans.empty()) ++nonempty;
    TagSequence tags = tags_from_spans(spans, length, inv);
    auto back = bio_decode(tags, inv);
    CHECK(back == spans);
  }
  CHECK(nonempty > 500);  // the generator exercises real content
}

TEST_CASE("load_dialogues: fixture, empty file, validation errors") {
  TempDir dir;
  SUBCASE("single dialogue fixture") {
    std::string path = write_file(
        dir, "one.jsonl",
        R"({"id":"d1","language":"en","utterances":[{"speaker":"A","turn":1,"tokens":["a","b"]},{"speaker":"B","turn":2,"tokens":["c"]},{"speaker":"A","turn":3,"tokens":["d","e"]}],"frames":[{"predicate":{"utt":2,"start":0,"end":0},"arguments":[{"utt":0,"start":1,"end":1,"role":"ARG0"},{"utt":2,"start":1,"end":1,"role":"ARG1"}]}]})"
            "\n");
    Dataset data = load_dialogues(path);
    REQUIRE(data.size() == 1);
    CHECK(data[0].dialogue.utterances.size() == 3);
    REQUIRE(data[0].frames.size() == 1);
    CHECK(data[0].frames[0].arguments.size() == 2);
  }
  SUBCASE("empty file yields empty dataset") {
    CHECK(load_dialogues(write_file(dir, "empty.jsonl", "")).empty());
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_dialogues(dir.file("absent.jsonl")), DataError);
  }
  SUBCASE("argument after the predicate's utterance is rejected") {
    std::string path = write_file(
        dir, "late.jsonl",
        R"({"id":"d1","language":"en","utterances":[{"speaker":"A","turn":1,"tokens":["a"]},{"speaker":"B","turn":2,"tokens":["b"]}],"frames":[{"predicate":{"utt":0,"start":0,"end":0},"arguments":[{"utt":1,"start":0,"end":0,"role":"ARG0"}]}]})"
            "\n");
    CHECK_THROWS_WITH_AS(load_dialogues(path),
                         doctest::Contains("frame 0"), DataError);
  }
  SUBCASE("overlapping argument spans are rejected at load") {
    std::string path = write_file(
        dir, "overlap.jsonl",
        R"({"id":"d1","language":"en","utterances":[{"speaker":"A","turn":1,"tokens":["a","b","c"]}],"frames":[{"predicate":{"utt":0,"start":0,"end":0},"arguments":[{"utt":0,"start":0,"end":1,"role":"ARG0"},{"utt":0,"start":1,"end":2,"role":"ARG1"}]}]})"
            "\n");
    CHECK_THROWS_WITH_AS(load_dialogues(path),
                         doctest::Contains("overlapping"), DataError);
  }
  SUBCASE("malformed json reports the line") {
    std::string path = write_file(dir, "bad.jsonl", "{not json}\n");
    CHECK_THROWS_WITH_AS(load_dialogues(path), doctest::Contains(":1"),
                         DataError);
  }
  SUBCASE("non-increasing turns are rejected") {
    std::string path = write_file(
        dir, "turns.jsonl",
        R"({"id":"d1","language":"en","utterances":[{"speaker":"A","turn":2,"tokens":["a"]},{"speaker":"B","turn":2,"tokens":["b"]}],"frames":[]})"
            "\n");
    CHECK_THROWS_AS(load_dialogues(path), DataError);
  }
  SUBCASE("duplicate dialogue ids are rejected") {
    std::string line =
        R"({"id":"dup","language":"en","utterances":[{"speaker":"A","turn":1,"tokens":["a"]}],"frames":[]})";
    std::string path =
        write_file(dir, "dup.jsonl", line + "\n" + line + "\n");
    CHECK_THROWS_AS(load_dialogues(path), DataError);
  }
  SUBCASE("span out of bounds is rejected") {
    std::string path = write_file(
        dir, "bounds.jsonl",
        R"({"id":"d1","language":"en","utterances":[{"speaker":"A","turn":1,"tokens":["a","b"]}],"frames":[{"predicate":{"utt":0,"start":1,"end":2},"arguments":[]}]})"
            "\n");
    CHECK_THROWS_AS(load_dialogues(path), DataError);
  }
}

TEST_CASE("load_parallel: fixture and errors") {
  TempDir dir;
  SUBCASE("three pairs") {
    std::string path = write_file(dir, "p.tsv",
                                  "a b\tx y\nc\tz\nd e f\tw v\n");
    ParallelCorpus pairs = load_parallel(path);
    REQUIRE(pairs.size() == 3);
    CHECK(pairs[0].source == std::vector<std::string>{"a", "b"});
    CHECK(pairs[0].target == std::vector<std::string>{"x", "y"});
    CHECK(pairs[2].target == std::vector<std::string>{"w", "v"});
  }
  SUBCASE("empty file") {
    CHECK(load_parallel(write_file(dir, "e.tsv", "")).empty());
  }
  SUBCASE("one column is an error") {
    CHECK_THROWS_AS(load_parallel(write_file(dir, "c.tsv", "only source\n")),
                    DataError);
  }
  SUBCASE("empty side is an error") {
    CHECK_THROWS_AS(load_parallel(write_file(dir, "s.tsv", "a\t \n")),
                    DataError);
  }
}

TEST_CASE("load_srl: role filter and schema") {
  TempDir dir;
  SUBCASE("non-standard roles are dropped on load") {
    std::string path = write_file(
        dir, "srl.jsonl",
        R"({"tokens":["he","ran","home","fast"],"predicate":{"start":1,"end":1},"arguments":[{"start":0,"end":0,"role":"ARG0"},{"start":2,"end":2,"role":"ARG1"},{"start":3,"end":3,"role":"ARGM-MNR"}]})"
            "\n");
    Dataset data = load_srl(path);
    REQUIRE(data.size() == 1);
    REQUIRE(data[0].frames.size() == 1);
    const auto& args = data[0].frames[0].arguments;
    REQUIRE(args.size() == 2);
    CHECK(args[0].role == "ARG0");
    CHECK(args[1].role == "ARG1");
  }
  SUBCASE("ARG-TMP is retained") {
    std::string path = write_file(
        dir, "tmp.jsonl",
        R"({"tokens":["rain","fell","yesterday"],"predicate":{"start":1,"end":1},"arguments":[{"start":2,"end":2,"role":"ARG-TMP"}]})"
            "\n");
    Dataset data = load_srl(path);
    REQUIRE(data[0].frames[0].arguments.size() == 1);
    CHECK(data[0].frames[0].arguments[0].role == "ARG-TMP");
  }
  SUBCASE("missing predicate is an error") {
    std::string path = write_file(
        dir, "nopred.jsonl",
        R"({"tokens":["a","b"],"arguments":[]})"
            "\n");
    CHECK_THROWS_AS(load_srl(path), DataError);
  }
  SUBCASE("single utterance with speaker S1 and turn 1") {
    std::string path = write_file(
        dir, "shape.jsonl",
        R"({"tokens":["a","b"],"predicate":{"start":0,"end":0},"arguments":[]})"
            "\n");
    Dataset data = load_srl(path);
    REQUIRE(data[0].dialogue.utterances.size() == 1);
    CHECK(data[0].dialogue.utterances[0].turn == 1);
    CHECK(data[0].frames[0].predicate.utt == 0);
  }
}

TEST_CASE("compute_stats: hand-counted toy and invariances") {
  SUBCASE("toy dataset cross ratio 0.25") {
    // 2 dialogues, 5 utterances, 3 predicates, 4 arguments, 1 cross.
    Dataset data;
    {
      DialogueSample s;
      s.dialogue = testutil::make_dialogue(3, 2, "a");
      Frame f1;
      f1.predicate = {1, 0, 0};
      f1.arguments.push_back({{1, 1, 1}, "ARG1"});
      f1.arguments.push_back({{0, 0, 0}, "ARG0"});  // cross
      Frame f2;
      f2.predicate = {2, 1, 1};
      f2.arguments.push_back({{2, 0, 0}, "ARG0"});
      s.frames = {f1, f2};
      data.push_back(std::move(s));
    }
    {
      DialogueSample s;
      s.dialogue = testutil::make_dialogue(2, 3, "b");
      Frame f;
      f.predicate = {1, 2, 2};
      f.arguments.push_back({{1, 0, 1}, "ARG1"});
      s.frames = {f};
      data.push_back(std::move(s));
    }
    DatasetStats st = compute_stats(data);
    CHECK(st.dialogues == 2);
    CHECK(st.utterances == 5);
    CHECK(st.tokens == 12);
    CHECK(st.predicates == 3);
    CHECK(st.arguments == 4);
    CHECK(st.cross_arguments == 1);
    CHECK(st.cross_ratio() == doctest::Approx(0.25));

    // Permutation invariance over dialogues.
    Dataset swapped{data[1], data[0]};
    DatasetStats st2 = compute_stats(swapped);
    CHECK(st2.predicates == st.predicates);
    CHECK(st2.cross_arguments == st.cross_arguments);
    CHECK(st2.tokens == st.tokens);
  }
  SUBCASE("empty dataset is all zeros") {
    DatasetStats st = compute_stats({});
    CHECK(st.dialogues == 0);
    CHECK(st.cross_ratio() == 0.0);
    CHECK(st.tokens_per_utterance() == 0.0);
  }
}

TEST_CASE("inventory_for appends extra roles in sorted order") {
  Dataset data;
  DialogueSample s;
  s.dialogue = testutil::make_dialogue(1, 4, "x");
  Frame f;
  f.predicate = {0, 0, 0};
  f.arguments.push_back({{0, 1, 1}, "ZROLE"});
  f.arguments.push_back({{0, 2, 2}, "AROLE"});
  f.arguments.push_back({{0, 3, 3}, "ARG1"});
  s.frames = {f};
  data.push_back(std::move(s));
  LabelInventory inv = inventory_for(data);
  REQUIRE(inv.role_count() == 10);
  CHECK(inv.roles()[8] == "AROLE");
  CHECK(inv.roles()[9] == "ZROLE");
}

TEST_CASE("flat_length sums window utterances") {
  Dialogue d = testutil::make_dialogue(4, 3);
  CHECK(flat_length(d, 0, 3) == 12);
  CHECK(flat_length(d, 2, 3) == 6);
  CHECK(flat_length(d, 3, 3) == 3);
}
