#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "multimix/sampling.hpp"
#include "test_util.hpp"

using namespace multimix;
using testutil::code_of;

TEST_CASE("mixture weights on pinned size vectors", "[sampling]") {
  // Frozen from an exact high-precision evaluation of
  // f^0.7 / sum f^0.7 at f = (0.25, 0.75).
  const auto w = mixture_weights({100, 300}, 0.7);
  REQUIRE(w.size() == 2);
  CHECK(w[0] == Catch::Approx(0.31668927659455397207).epsilon(1e-12));
  CHECK(w[1] == Catch::Approx(0.68331072340544602793).epsilon(1e-12));

  // alpha = 0 flattens, alpha = 1 is proportional.
  const auto flat = mixture_weights({100, 300}, 0.0);
  CHECK(flat[0] == Catch::Approx(0.5));
  CHECK(flat[1] == Catch::Approx(0.5));
  const auto prop = mixture_weights({100, 300}, 1.0);
  CHECK(prop[0] == Catch::Approx(0.25));
  CHECK(prop[1] == Catch::Approx(0.75));
}

TEST_CASE("mixture weights always form a distribution", "[sampling]") {
  for (double alpha : {0.0, 0.3, 0.7, 1.0, 2.0}) {
    const auto w = mixture_weights({7, 19, 64, 300}, alpha);
    double sum = 0.0;
    for (double v : w) {
      CHECK(v > 0.0);
      sum += v;
    }
    CHECK(sum == Catch::Approx(1.0));
  }
  // alpha below 1 never widens the gap between large and small datasets.
  const auto a07 = mixture_weights({10, 90}, 0.7);
  const auto a10 = mixture_weights({10, 90}, 1.0);
  CHECK(a07[0] > a10[0]);
  CHECK(a07[0] < 0.5);
}

TEST_CASE("mixture weight validation", "[sampling]") {
  CHECK(code_of([] { mixture_weights({}, 0.7); }) == Errc::EmptySizes);
  CHECK(code_of([] { mixture_weights({5, 0}, 0.7); }) == Errc::ZeroSize);
  CHECK(code_of([] { mixture_weights({5, 5}, -0.1); }) == Errc::ConfigInvalid);
}

TEST_CASE("stream draws follow the multinomial", "[sampling]") {
  const std::vector<std::size_t> sizes = {100, 300};
  for (double alpha : {0.0, 0.7, 1.0}) {
    MixtureStream stream(sizes, alpha, 77);
    const auto want = mixture_weights(sizes, alpha);
    const int draws = 100000;
    std::vector<int> hits(sizes.size(), 0);
    for (int i = 0; i < draws; ++i) {
      const auto ref = stream.next();
      REQUIRE(ref.dataset < sizes.size());
      REQUIRE(ref.sample < sizes[ref.dataset]);
      ++hits[ref.dataset];
    }
    for (std::size_t d = 0; d < sizes.size(); ++d)
      CHECK(std::abs(static_cast<double>(hits[d]) / draws - want[d]) < 0.01);
  }
}

TEST_CASE("within a dataset the pick is uniform", "[sampling]") {
  MixtureStream stream({10}, 1.0, 5);
  std::vector<int> hits(10, 0);
  const int draws = 50000;
  for (int i = 0; i < draws; ++i) ++hits[stream.next().sample];
  for (int h : hits) {
    CHECK(h > 4500);
    CHECK(h < 5500);
  }
}

TEST_CASE("streams are reproducible per seed", "[sampling]") {
  MixtureStream a({5, 25, 50}, 0.7, 123);
  MixtureStream b({5, 25, 50}, 0.7, 123);
  MixtureStream c({5, 25, 50}, 0.7, 124);
  bool same = true, differ = false;
  for (int i = 0; i < 200; ++i) {
    const auto ra = a.next(), rb = b.next(), rc = c.next();
    same = same && ra.dataset == rb.dataset && ra.sample == rb.sample;
    differ = differ || ra.dataset != rc.dataset || ra.sample != rc.sample;
  }
  CHECK(same);
  CHECK(differ);
}

TEST_CASE("sample_stream shapes and validates its batches", "[sampling]") {
  LabeledDataset small, large;
  small.vocab = large.vocab = LabelVocab::sentence({"x", "y"});
  auto mk = [](const std::string& id) {
    Sample s;
    s.id = id;
    s.kind = TaskKind::Pair;
    s.part_a = {"a"};
    s.part_b = {"b"};
    return s;
  };
  for (int i = 0; i < 4; ++i) small.samples.push_back(mk("s" + std::to_string(i)));
  for (int i = 0; i < 12; ++i) large.samples.push_back(mk("l" + std::to_string(i)));

  const auto batches = sample_stream({&small, &large}, 0.7, 8, 5, 9);
  REQUIRE(batches.size() == 5);
  for (const auto& b : batches) {
    REQUIRE(b.size() == 8);
    for (const auto& ref : b) {
      REQUIRE(ref.dataset < 2);
      CHECK(ref.sample < (ref.dataset == 0 ? 4u : 12u));
    }
  }

  LabeledDataset empty;
  empty.vocab = small.vocab;
  CHECK(code_of([&] { sample_stream({&small, &empty}, 0.7, 4, 2, 1); }) == Errc::EmptyDataset);
  CHECK(code_of([&] { sample_stream({}, 0.7, 4, 2, 1); }) == Errc::EmptySizes);
}
