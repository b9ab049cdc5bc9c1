#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "multimix/data.hpp"
#include "test_util.hpp"

using namespace multimix;
using testutil::code_of;
using testutil::read_file;
using testutil::tmp_dir;
using testutil::write_file;

namespace {

LabeledDataset small_tagging() {
  LabeledDataset ds;
  ds.vocab = LabelVocab::iob2({"O", "B-PER", "I-PER"});
  Sample a{"t1", TaskKind::Tagging, {"ana", "visits", "bo"}, {}, {}, ""};
  Sample b{"t2", TaskKind::Tagging, {"nothing", "here"}, {}, {}, ""};
  ds.samples = {a, b};
  ds.labels = {{1, 0, 1}, {0, 0}};
  return ds;
}

LabeledDataset small_pair() {
  LabeledDataset ds;
  ds.vocab = LabelVocab::sentence({"entail", "contradict", "neutral"});
  Sample a{"p1", TaskKind::Pair, {}, {"a", "b"}, {"c"}, ""};
  Sample b{"p2", TaskKind::Pair, {}, {"d"}, {"e", "f"}, "p1"};
  ds.samples = {a, b};
  ds.labels = {{0}, {2}};
  return ds;
}

}  // namespace

TEST_CASE("label vocab validation", "[data]") {
  CHECK_NOTHROW(LabelVocab::iob2({"O", "B-PER", "I-PER", "B-LOC"}));
  CHECK(code_of([] { LabelVocab::iob2({"O", "I-PER"}); }) == Errc::ConfigInvalid);
  CHECK(code_of([] { LabelVocab::iob2({"B-PER", "I-PER"}); }) == Errc::ConfigInvalid);
  CHECK(code_of([] { LabelVocab::iob2({"O", "X-PER"}); }) == Errc::ConfigInvalid);
  CHECK(code_of([] { LabelVocab::sentence({"a", "a"}); }) == Errc::ConfigInvalid);
  CHECK(code_of([] { LabelVocab::sentence({"only"}); }) == Errc::ConfigInvalid);
  CHECK_NOTHROW(LabelVocab::sentence({"yes", "no"}));
}

TEST_CASE("dataset validation rejects structural breakage", "[data]") {
  auto ds = small_tagging();
  CHECK_NOTHROW(ds.validate());

  auto dup = ds;
  dup.samples[1].id = "t1";
  CHECK(code_of([&] { dup.validate(); }) == Errc::DuplicateId);

  auto mixed = ds;
  mixed.samples[1] = small_pair().samples[0];
  mixed.labels[1] = {0};
  CHECK(code_of([&] { mixed.validate(); }) == Errc::ConfigInvalid);

  auto arity = ds;
  arity.labels[0] = {1, 0};
  CHECK(code_of([&] { arity.validate(); }) == Errc::LabelLengthMismatch);

  auto range = ds;
  range.labels[0][0] = 7;
  CHECK(code_of([&] { range.validate(); }) == Errc::UnknownLabel);

  auto blank = ds;
  blank.samples[0].tokens[1] = "two words";
  CHECK(code_of([&] { blank.validate(); }) == Errc::MalformedLine);

  auto empty_tok = ds;
  empty_tok.samples[0].tokens.clear();
  CHECK(code_of([&] { empty_tok.validate(); }) == Errc::MalformedLine);
}

TEST_CASE("jsonl round-trip is byte-stable", "[data]") {
  const auto dir = tmp_dir("data-roundtrip");
  for (bool pair : {false, true}) {
    const auto ds = pair ? small_pair() : small_tagging();
    const auto path = (dir / (pair ? "pair.jsonl" : "tag.jsonl")).string();
    save_jsonl(ds, path);
    const std::string first = read_file(path);

    const auto back = load_jsonl(path, ds.vocab);
    REQUIRE(back.size() == ds.size());
    CHECK(back.labeled());
    CHECK(back.labels == ds.labels);
    for (std::size_t i = 0; i < ds.size(); ++i) {
      CHECK(back.samples[i].id == ds.samples[i].id);
      CHECK(back.samples[i].kind == ds.samples[i].kind);
      CHECK(back.samples[i].tokens == ds.samples[i].tokens);
      CHECK(back.samples[i].part_a == ds.samples[i].part_a);
      CHECK(back.samples[i].part_b == ds.samples[i].part_b);
      CHECK(back.samples[i].origin_id == ds.samples[i].origin_id);
    }

    save_jsonl(back, path);
    CHECK(read_file(path) == first);
  }
}

TEST_CASE("loader reports the offending line", "[data]") {
  const auto dir = tmp_dir("data-loader");
  const auto vocab = LabelVocab::iob2({"O", "B-PER", "I-PER"});
  const auto path = (dir / "bad.jsonl").string();

  write_file(path, R"({"id":"a","kind":"tagging","tokens":["x"]})"
                   "\n"
                   "not json\n");
  try {
    load_jsonl(path, vocab);
    FAIL("expected MalformedLine");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::MalformedLine);
    CHECK(std::string(e.what()).find("2") != std::string::npos);
  }

  write_file(path, R"({"id":"a","kind":"tagging","tokens":["x"],"labels":["B-ORG"]})"
                   "\n");
  CHECK(code_of([&] { load_jsonl(path, vocab); }) == Errc::UnknownLabel);

  write_file(path, R"({"id":"a","kind":"tagging","tokens":["x","y"],"labels":["O"]})"
                   "\n");
  CHECK(code_of([&] { load_jsonl(path, vocab); }) == Errc::LabelLengthMismatch);

  write_file(path, R"({"id":"a","kind":"tagging","tokens":["x"]})"
                   "\n"
                   R"({"id":"a","kind":"tagging","tokens":["y"]})"
                   "\n");
  CHECK(code_of([&] { load_jsonl(path, vocab); }) == Errc::DuplicateId);

  // A file where only some rows carry labels is neither labeled nor unlabeled.
  write_file(path, R"({"id":"a","kind":"tagging","tokens":["x"],"labels":["O"]})"
                   "\n"
                   R"({"id":"b","kind":"tagging","tokens":["y"]})"
                   "\n");
  CHECK(code_of([&] { load_jsonl(path, vocab); }) == Errc::LabelLengthMismatch);

  write_file(path, R"({"id":"a","kind":"flat","tokens":["x"]})"
                   "\n");
  CHECK(code_of([&] { load_jsonl(path, vocab); }) == Errc::MalformedLine);
}

TEST_CASE("loader skips blank lines and accepts unlabeled files", "[data]") {
  const auto dir = tmp_dir("data-blank");
  const auto vocab = LabelVocab::iob2({"O", "B-PER", "I-PER"});
  const auto path = (dir / "ok.jsonl").string();
  write_file(path, "\n"
                   R"({"id":"a","kind":"tagging","tokens":["x"]})"
                   "\n\n"
                   R"({"id":"b","kind":"tagging","tokens":["y"],"origin_id":"a"})"
                   "\n");
  const auto ds = load_jsonl(path, vocab);
  REQUIRE(ds.size() == 2);
  CHECK_FALSE(ds.labeled());
  CHECK(ds.samples[1].origin_id == "a");
}

TEST_CASE("without_labels drops only the label column", "[data]") {
  const auto ds = small_tagging();
  const auto un = ds.without_labels();
  CHECK_FALSE(un.labeled());
  CHECK(un.size() == ds.size());
  CHECK(un.vocab == ds.vocab);
  CHECK(un.samples[0].id == ds.samples[0].id);
}

TEST_CASE("subsample takes the ceiling and keeps input order", "[data]") {
  LabeledDataset ds;
  ds.vocab = LabelVocab::sentence({"a", "b"});
  for (int i = 0; i < 10; ++i) {
    Sample s{"s" + std::to_string(i), TaskKind::Pair, {}, {"x"}, {"y"}, ""};
    ds.samples.push_back(s);
    ds.labels.push_back({i % 2});
  }

  const auto quarter = subsample(ds, 25.0, 3);
  REQUIRE(quarter.size() == 3);  // ceil(0.25 * 10)
  // Selection preserves the original relative order.
  std::vector<std::string> ids;
  for (const auto& s : quarter.samples) ids.push_back(s.id);
  auto sorted = ids;
  std::sort(sorted.begin(), sorted.end(),
            [](const std::string& a, const std::string& b) {
              return std::stoi(a.substr(1)) < std::stoi(b.substr(1));
            });
  CHECK(ids == sorted);
  // Labels travel with their samples.
  for (std::size_t i = 0; i < quarter.size(); ++i)
    CHECK(quarter.labels[i][0] == std::stoi(quarter.samples[i].id.substr(1)) % 2);

  const auto again = subsample(ds, 25.0, 3);
  CHECK(again.samples[0].id == quarter.samples[0].id);
  CHECK(again.samples[2].id == quarter.samples[2].id);

  const auto all = subsample(ds, 100.0, 9);
  REQUIRE(all.size() == 10);
  for (std::size_t i = 0; i < 10; ++i) CHECK(all.samples[i].id == ds.samples[i].id);

  CHECK(code_of([&] { subsample(ds, 0.0, 1); }) == Errc::ConfigInvalid);
  CHECK(code_of([&] { subsample(ds, 101.0, 1); }) == Errc::ConfigInvalid);
  LabeledDataset empty;
  empty.vocab = ds.vocab;
  CHECK(code_of([&] { subsample(empty, 50.0, 1); }) == Errc::EmptyDataset);
}
