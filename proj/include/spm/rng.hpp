#pragma once

#include <cstdint>
#include <string_view>

namespace spm {

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

constexpr std::uint64_t mix64(std::uint64_t x) {
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Independent draw streams of one replication.
enum class StreamPurpose : std::uint64_t {
  kEnvironment = 1,
  kLearner = 2,
  kAvailability = 3,
  kOracle = 4,
};

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t horizon,
                                 std::uint64_t replication,
                                 StreamPurpose purpose) {
  std::uint64_t h = mix64(master + kGolden);
  h = mix64(h ^ (horizon + 0x632be59bd9b4e019ULL));
  h = mix64(h ^ (replication + 0x85157af5ULL * kGolden));
  h = mix64(h ^ (static_cast<std::uint64_t>(purpose) * 0xd1b54a32d192ed03ULL));
  return h;
}

// Counter-based SplitMix64 stream. The whole state is (key, counter), which
// makes checkpoints exact and lets a stream be split without coordination.
class Rng {
 public:
  explicit Rng(std::uint64_t key = 0, std::uint64_t counter = 0)
      : key_(key), counter_(counter) {}

  std::uint64_t next_u64() { return mix64(key_ + (++counter_) * kGolden); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform integer on [0, n).
  std::uint64_t below(std::uint64_t n) {
    return static_cast<std::uint64_t>(uniform() * static_cast<double>(n)) % n;
  }

  bool bernoulli(double prob) { return uniform() < prob; }

  Rng split(std::uint64_t purpose) const {
    return Rng(mix64(key_ ^ mix64(purpose * kGolden + 0x2545f4914f6cdd1dULL)));
  }

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_;
};

}  // namespace spm
