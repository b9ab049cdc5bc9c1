#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "multimix/metrics.hpp"
#include "test_util.hpp"

using namespace multimix;
using testutil::code_of;

namespace {

// O=0 B-PER=1 I-PER=2 B-LOC=3 I-LOC=4
const LabelVocab kVocab = LabelVocab::iob2({"O", "B-PER", "I-PER", "B-LOC", "I-LOC"});

}  // namespace

TEST_CASE("micro F1 counts exact span matches", "[metrics]") {
  // gold: PER(0,2) LOC(3,4); pred recovers only the PER span.
  const auto sc = micro_f1({{1, 2, 0, 3}}, {{1, 2, 0, 0}}, kVocab);
  CHECK(sc.precision == Catch::Approx(1.0));
  CHECK(sc.recall == Catch::Approx(0.5));
  CHECK(sc.f1 == Catch::Approx(2.0 / 3.0));
}

TEST_CASE("a boundary error is a miss, not partial credit", "[metrics]") {
  const auto sc = micro_f1({{1, 2, 0}}, {{1, 0, 0}}, kVocab);
  CHECK(sc.precision == 0.0);
  CHECK(sc.recall == 0.0);
  CHECK(sc.f1 == 0.0);
}

TEST_CASE("micro pooling spans several sentences", "[metrics]") {
  // Sentence 0: gold PER(0,1); pred matches it.
  // Sentence 1: gold PER(0,1) LOC(2,3); pred gets LOC right and hallucinates
  // a PER at the wrong place. tp=2, |pred|=3, |gold|=3.
  const auto sc = micro_f1({{1, 0}, {1, 0, 3}}, {{1, 0}, {0, 1, 3}}, kVocab);
  CHECK(sc.precision == Catch::Approx(2.0 / 3.0));
  CHECK(sc.recall == Catch::Approx(2.0 / 3.0));
  CHECK(sc.f1 == Catch::Approx(2.0 / 3.0));
}

TEST_CASE("stray predicted I-tags are repaired as span starts", "[metrics]") {
  // pred opens with I-PER: read as B-PER, so both sides hold PER(1,3).
  const auto sc = micro_f1({{0, 1, 2}}, {{0, 2, 2}}, kVocab);
  CHECK(sc.f1 == Catch::Approx(1.0));

  // A type switch inside a span starts a new one on the predicted side.
  const auto sw = micro_f1({{1, 0}, {0, 3}}, {{1, 4}, {0, 3}}, kVocab);
  // pred spans: PER(0,1)@s0, LOC(1,2)@s0, LOC(1,2)@s1; gold: PER(0,1)@s0, LOC(1,2)@s1.
  CHECK(sw.precision == Catch::Approx(2.0 / 3.0));
  CHECK(sw.recall == Catch::Approx(1.0));
}

TEST_CASE("gold sequences must be well-formed IOB2", "[metrics]") {
  CHECK(code_of([] { micro_f1({{0, 2}}, {{0, 0}}, kVocab); }) == Errc::SchemeViolation);
  CHECK(code_of([] { micro_f1({{1, 4}}, {{0, 0}}, kVocab); }) == Errc::SchemeViolation);
}

TEST_CASE("no spans on either side is a perfect score", "[metrics]") {
  const auto sc = micro_f1({{0, 0, 0}}, {{0, 0, 0}}, kVocab);
  CHECK(sc.precision == 1.0);
  CHECK(sc.recall == 1.0);
  CHECK(sc.f1 == 1.0);
}

TEST_CASE("micro F1 validates its inputs", "[metrics]") {
  const auto sent = LabelVocab::sentence({"a", "b"});
  CHECK(code_of([&] { micro_f1({{0}}, {{0}}, sent); }) == Errc::ConfigInvalid);
  CHECK(code_of([] { micro_f1({{0}, {0}}, {{0}}, kVocab); }) == Errc::LengthMismatch);
  CHECK(code_of([] { micro_f1({{0, 0}}, {{0}}, kVocab); }) == Errc::LengthMismatch);
}

TEST_CASE("accuracy is the exact-match fraction", "[metrics]") {
  CHECK(accuracy({0, 1, 2, 1}, {0, 1, 0, 1}) == Catch::Approx(0.75));
  CHECK(accuracy({1}, {1}) == 1.0);
  CHECK(code_of([] { accuracy({0, 1}, {0}); }) == Errc::LengthMismatch);
  CHECK(code_of([] { accuracy({}, {}); }) == Errc::EmptyDataset);
}

TEST_CASE("mean_std uses the population deviation", "[metrics]") {
  const auto ms = mean_std({1.0, 2.0, 3.0, 4.0});
  CHECK(ms.mean == Catch::Approx(2.5));
  CHECK(ms.std == Catch::Approx(std::sqrt(1.25)));
  const auto single = mean_std({5.0});
  CHECK(single.mean == 5.0);
  CHECK(single.std == 0.0);
  CHECK(code_of([] { mean_std({}); }) == Errc::EmptyDataset);
}
