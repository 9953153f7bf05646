#include <doctest.h>

#include <cmath>
#include <set>

#include "spm/rng.hpp"

using spm::Rng;

TEST_CASE("rng reproduces the reference SplitMix64 stream") {
  // Published SplitMix64 outputs for state 0.
  Rng rng(0);
  CHECK(rng.next_u64() == 0xe220a8397b1dcdafULL);
  CHECK(rng.next_u64() == 0x6e789e6aa1b965f4ULL);
  CHECK(rng.next_u64() == 0x06c45d188009454fULL);
}

TEST_CASE("rng state is exactly (key, counter)") {
  Rng a(1234);
  for (int i = 0; i < 17; ++i) a.uniform();
  Rng b(a.key(), a.counter());
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("uniform and below stay in range with sensible moments") {
  Rng rng(99);
  double sum = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    sum += u;
  }
  const double se = std::sqrt(1.0 / 12.0 / n);
  CHECK(std::abs(sum / n - 0.5) < 4.0 * se);

  std::set<std::uint64_t> seen;
  for (int i = 0; i < 10000; ++i) {
    const auto v = rng.below(7);
    REQUIRE(v < 7);
    seen.insert(v);
  }
  CHECK(seen.size() == 7);
}

TEST_CASE("derived seeds separate horizons, replications and purposes") {
  using spm::StreamPurpose;
  std::set<std::uint64_t> seeds;
  for (std::uint64_t T : {64ULL, 128ULL})
    for (std::uint64_t r = 0; r < 5; ++r)
      for (auto p : {StreamPurpose::kEnvironment, StreamPurpose::kLearner,
                     StreamPurpose::kAvailability, StreamPurpose::kOracle})
        seeds.insert(spm::derive_seed(7, T, r, p));
  CHECK(seeds.size() == 2 * 5 * 4);
  CHECK(spm::derive_seed(7, 64, 0, StreamPurpose::kLearner) ==
        spm::derive_seed(7, 64, 0, StreamPurpose::kLearner));
  CHECK(spm::derive_seed(7, 64, 0, StreamPurpose::kLearner) !=
        spm::derive_seed(8, 64, 0, StreamPurpose::kLearner));
}

TEST_CASE("split streams are independent of the parent position") {
  Rng a(5);
  const Rng child_before = a.split(3);
  a.uniform();
  const Rng child_after = a.split(3);
  CHECK(child_before.key() == child_after.key());
  CHECK(a.split(3).key() != a.split(4).key());
}
