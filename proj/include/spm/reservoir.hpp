#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "spm/errors.hpp"

namespace spm {

enum class ReservoirPhase { kFill, kReplace };

struct Reservoir {
  std::size_t capacity = 1;
  std::vector<double> samples;
  double mean = 0.0;
};

inline std::size_t ceil_log(long long T) {
  const double l = std::ceil(std::log(static_cast<double>(T)));
  return static_cast<std::size_t>(std::max(1.0, l));
}

inline std::size_t reservoir_capacity(long long T) { return ceil_log(T); }

inline double reservoir_probability(long long t, int K, double log_factor) {
  return std::min(K * log_factor / static_cast<double>(t), 1.0);
}

// b_t for the reservoir-predictor learner with the natural log of the horizon. The learner itself
// calls reservoir_probability with ceil(ln T) so that warm-up rounds are
// always reservoir rounds.
inline bool schedule_reservoir_round(long long t, int K, long long T, double u) {
  return u < reservoir_probability(t, K, std::log(static_cast<double>(T)));
}

inline void reservoir_insert_inplace(Reservoir& r, double loss, ReservoirPhase phase,
                                     double u) {
  if (!(loss >= 0.0 && loss <= 1.0))
    throw LossOutOfRange("reservoir losses must lie in [0,1], got " + std::to_string(loss));
  if (phase == ReservoirPhase::kFill) {
    if (r.samples.size() >= r.capacity)
      throw Error("fill requested on a full reservoir");
    r.samples.push_back(loss);
  } else {
    if (r.samples.empty()) throw ReplaceOnEmpty("reservoir has no samples");
    const auto n = r.samples.size();
    const auto idx = std::min(static_cast<std::size_t>(u * static_cast<double>(n)), n - 1);
    r.samples[idx] = loss;
  }
  double sum = 0.0;
  for (double s : r.samples) sum += s;
  r.mean = sum / static_cast<double>(r.samples.size());
}

inline Reservoir reservoir_insert(Reservoir r, double loss, ReservoirPhase phase,
                                  double u) {
  reservoir_insert_inplace(r, loss, phase, u);
  return r;
}

}  // namespace spm
