#pragma once

// Oblivious loss generators. An Environment materializes its full T x K loss
// matrix (and availability mask for sleeping instances) at construction from
// a single seed, so the sequence never depends on the learner.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "spm/errors.hpp"
#include "spm/rng.hpp"
#include "spm/spm.hpp"

namespace spm {

enum class EnvKind {
  kStochasticGaps,
  kSelfBounding,
  kAdversarialScripted,
  kSparseAdversarial,
  kSoftSparse,
  kVariationBounded,
  kSleeping,
  kLowerBoundStochastic,
  kLowerBoundAdversarial,
};

inline const char* to_string(EnvKind k) {
  switch (k) {
    case EnvKind::kStochasticGaps: return "stochastic_gaps";
    case EnvKind::kSelfBounding: return "self_bounding";
    case EnvKind::kAdversarialScripted: return "adversarial_scripted";
    case EnvKind::kSparseAdversarial: return "sparse_adversarial";
    case EnvKind::kSoftSparse: return "soft_sparse";
    case EnvKind::kVariationBounded: return "variation_bounded";
    case EnvKind::kSleeping: return "sleeping";
    case EnvKind::kLowerBoundStochastic: return "lower_bound_stochastic";
    case EnvKind::kLowerBoundAdversarial: return "lower_bound_adversarial";
  }
  return "unknown";
}

inline EnvKind env_kind_from_string(const std::string& s) {
  for (auto k : {EnvKind::kStochasticGaps, EnvKind::kSelfBounding,
                 EnvKind::kAdversarialScripted, EnvKind::kSparseAdversarial,
                 EnvKind::kSoftSparse, EnvKind::kVariationBounded, EnvKind::kSleeping,
                 EnvKind::kLowerBoundStochastic, EnvKind::kLowerBoundAdversarial})
    if (s == to_string(k)) return k;
  throw ConfigError("unknown environment kind '" + s + "'");
}

enum class BaseDistribution { kBernoulli, kDeterministic };

struct EnvSpec {
  EnvKind kind = EnvKind::kStochasticGaps;
  int K = 0;
  LossRange range = LossRange::kUnit;

  // Stochastic families: arm i has mean base_mean + gaps[i].
  std::vector<double> gaps;
  double base_mean = 0.0;
  BaseDistribution base = BaseDistribution::kBernoulli;
  double corruption = 0.0;  // C for the self-bounding regime

  // Hard sparsity: S arms carry a loss each round; the best arm's loss is
  // Bernoulli(0.5 - sparse_gap), the others Bernoulli(0.5).
  int sparsity = 1;
  double sparse_gap = 0.25;

  // Soft sparsity and the lower-bound instances.
  double alpha = 0.5;
  double soft_u = 1.0;

  // Variation-bounded: clip(anchor + rho * noise), noise ~ Unif[-1,1]^K.
  double q_target = 0.0;
  std::vector<double> anchor;

  // Sleeping: independent availability with this probability unless a
  // scripted T x K 0/1 mask is given. Losses follow the stochastic fields
  // unless loss_matrix is given.
  double availability = 0.7;
  std::vector<std::vector<char>> availability_script;

  // Scripted losses, T rows of K entries.
  std::vector<std::vector<double>> loss_matrix;

  int best_arm = 0;  // i* for sparse and lower-bound instances

  bool uses_negative_losses() const {
    return kind == EnvKind::kLowerBoundStochastic ||
           kind == EnvKind::kLowerBoundAdversarial ||
           range == LossRange::kSigned;
  }
};

inline LossRange declared_range(const EnvSpec& spec) {
  return spec.uses_negative_losses() ? LossRange::kSigned : LossRange::kUnit;
}

struct LowerBoundParams {
  double eta = 0.0;
  double epsilon = 0.0;
};

inline LowerBoundParams lower_bound_adv_params(int K, long long T, double alpha,
                                               double U) {
  const double ka = std::pow(static_cast<double>(K), alpha);
  if (K < 4 || T < 4LL * K || !(alpha > 0.0 && alpha < 1.0) || !(U >= 1.0) ||
      !(U <= ka / 4.0))
    throw InvalidRegime("need K >= 4, T >= 4K, alpha in (0,1), 1 <= U <= K^alpha/4");
  const double c = static_cast<double>(K) / (8.0 * static_cast<double>(T));
  const double root = (-std::sqrt(c) + std::sqrt(c + 4.0 * ka * U)) / (2.0 * ka);
  LowerBoundParams out;
  out.eta = root * root;
  out.epsilon = std::sqrt(out.eta * c);
  return out;
}

inline double lower_bound_delta_min(int K, double alpha, double U) {
  return U / (std::pow(static_cast<double>(K), alpha) + 1.0);
}

struct EmittedRound {
  std::vector<double> loss;
  std::optional<std::vector<char>> active;
};

namespace detail {

inline double base_draw(const EnvSpec& spec, double mean, Rng& rng) {
  mean = std::clamp(mean, 0.0, 1.0);
  if (spec.base == BaseDistribution::kDeterministic) return mean;
  return rng.bernoulli(mean) ? 1.0 : 0.0;
}

inline void stochastic_row(const EnvSpec& spec, Rng& rng, std::vector<double>& row) {
  for (int i = 0; i < spec.K; ++i) {
    const double gap = spec.gaps.empty() ? 0.0 : spec.gaps[static_cast<std::size_t>(i)];
    row[static_cast<std::size_t>(i)] = base_draw(spec, spec.base_mean + gap, rng);
  }
}

inline std::vector<int> random_subset(int K, int size, Rng& rng) {
  std::vector<int> idx(static_cast<std::size_t>(K));
  for (int i = 0; i < K; ++i) idx[static_cast<std::size_t>(i)] = i;
  for (int j = 0; j < size; ++j) {
    const auto r = j + static_cast<int>(rng.below(static_cast<std::uint64_t>(K - j)));
    std::swap(idx[static_cast<std::size_t>(j)], idx[static_cast<std::size_t>(r)]);
  }
  idx.resize(static_cast<std::size_t>(size));
  return idx;
}

inline std::vector<char> draw_availability(const EnvSpec& spec, Rng& rng) {
  std::vector<char> a(static_cast<std::size_t>(spec.K), 0);
  for (;;) {
    bool any = false;
    for (auto& v : a) {
      v = rng.bernoulli(spec.availability) ? 1 : 0;
      any = any || v;
    }
    if (any) return a;
  }
}

// Soft-sparse support size: floor(U^{1/alpha}) or one more, mixed so that
// E[s^alpha] = U exactly.
inline int soft_support(const EnvSpec& spec, Rng& rng) {
  const double s0 = std::floor(std::pow(spec.soft_u, 1.0 / spec.alpha));
  const double lo = std::pow(s0, spec.alpha);
  const double hi = std::pow(s0 + 1.0, spec.alpha);
  const double theta = (spec.soft_u - lo) / (hi - lo);
  return static_cast<int>(s0) + (rng.bernoulli(theta) ? 1 : 0);
}

}  // namespace detail

inline void validate(const EnvSpec& spec, long long T) {
  if (spec.K < 2) throw ConfigError("environment needs K >= 2");
  if (T < 1) throw ConfigError("environment needs T >= 1");
  if (!spec.gaps.empty() && spec.gaps.size() != static_cast<std::size_t>(spec.K))
    throw ConfigError("gap vector must have K entries");
  if (spec.best_arm < 0 || spec.best_arm >= spec.K)
    throw ConfigError("best_arm outside [0, K)");
  switch (spec.kind) {
    case EnvKind::kSparseAdversarial:
      if (spec.sparsity < 1 || spec.sparsity > spec.K)
        throw ConfigError("sparsity must lie in [1, K]");
      break;
    case EnvKind::kSoftSparse:
      if (!(spec.soft_u >= 0.0) ||
          spec.soft_u > std::pow(static_cast<double>(spec.K - 1), spec.alpha))
        throw ConfigError("soft sparsity U must lie in [0, (K-1)^alpha]");
      break;
    case EnvKind::kVariationBounded:
      if (spec.anchor.size() != static_cast<std::size_t>(spec.K))
        throw ConfigError("variation-bounded environments need a K-entry anchor");
      if (!(spec.q_target >= 0.0)) throw ConfigError("Q target must be nonnegative");
      break;
    case EnvKind::kAdversarialScripted:
      if (static_cast<long long>(spec.loss_matrix.size()) < T)
        throw ConfigError("scripted loss matrix has fewer than T rows");
      break;
    case EnvKind::kSleeping:
      if (!spec.availability_script.empty() &&
          static_cast<long long>(spec.availability_script.size()) < T)
        throw ConfigError("availability script has fewer than T rows");
      if (!(spec.availability > 0.0 && spec.availability <= 1.0))
        throw ConfigError("availability probability must lie in (0,1]");
      break;
    case EnvKind::kLowerBoundStochastic:
      if (lower_bound_delta_min(spec.K, spec.alpha, spec.soft_u) > 0.5)
        throw ConfigError("lower-bound gap exceeds 1/2");
      break;
    case EnvKind::kLowerBoundAdversarial:
      lower_bound_adv_params(spec.K, T, spec.alpha, spec.soft_u);
      break;
    default:
      break;
  }
  for (const auto& row : spec.loss_matrix)
    if (row.size() != static_cast<std::size_t>(spec.K))
      throw ConfigError("scripted loss rows must have K entries");
  for (const auto& row : spec.availability_script)
  {
    if (row.size() != static_cast<std::size_t>(spec.K))
      throw ConfigError("availability rows must have K entries");
    if (std::none_of(row.begin(), row.end(), [](char a) { return a != 0; }))
      throw ConfigError("availability row with no active arm");
  }
}

// One round of the environment. Variation-bounded instances emit
// clip(anchor + rho * noise) with the given rho; Environment calibrates rho.
inline EmittedRound env_emit_round(const EnvSpec& spec, long long t, long long T,
                                   Rng& rng, double rho = 0.0) {
  const auto K = static_cast<std::size_t>(spec.K);
  EmittedRound out;
  out.loss.assign(K, 0.0);
  auto& row = out.loss;
  switch (spec.kind) {
    case EnvKind::kStochasticGaps:
    case EnvKind::kSelfBounding:
      detail::stochastic_row(spec, rng, row);
      break;
    case EnvKind::kAdversarialScripted:
      row = spec.loss_matrix[static_cast<std::size_t>(t - 1)];
      break;
    case EnvKind::kSparseAdversarial: {
      for (int i : detail::random_subset(spec.K, spec.sparsity, rng)) {
        const double mean = i == spec.best_arm ? 0.5 - spec.sparse_gap : 0.5;
        const bool hit = rng.bernoulli(mean);
        if (spec.range == LossRange::kSigned)
          row[static_cast<std::size_t>(i)] = hit ? 1.0 : -1.0;
        else
          row[static_cast<std::size_t>(i)] = hit ? 1.0 : 0.0;
      }
      break;
    }
    case EnvKind::kSoftSparse: {
      const int s = std::min(detail::soft_support(spec, rng), spec.K - 1);
      auto idx = detail::random_subset(spec.K - 1, s, rng);
      for (int j : idx) {
        const int arm = j >= spec.best_arm ? j + 1 : j;
        row[static_cast<std::size_t>(arm)] = 1.0;
      }
      break;
    }
    case EnvKind::kVariationBounded:
      for (std::size_t i = 0; i < K; ++i) {
        const double noise = 2.0 * rng.uniform() - 1.0;
        row[i] = std::clamp(spec.anchor[i] + rho * noise, 0.0, 1.0);
      }
      break;
    case EnvKind::kSleeping:
      if (!spec.loss_matrix.empty())
        row = spec.loss_matrix[static_cast<std::size_t>(t - 1)];
      else
        detail::stochastic_row(spec, rng, row);
      if (!spec.availability_script.empty())
        out.active = spec.availability_script[static_cast<std::size_t>(t - 1)];
      else
        out.active = detail::draw_availability(spec, rng);
      break;
    case EnvKind::kLowerBoundStochastic: {
      const double delta = lower_bound_delta_min(spec.K, spec.alpha, spec.soft_u);
      const double u = rng.uniform();
      if (u < delta)
        std::fill(row.begin(), row.end(), -1.0);
      else if (u < 2.0 * delta)
        row[static_cast<std::size_t>(spec.best_arm)] = -1.0;
      break;
    }
    case EnvKind::kLowerBoundAdversarial: {
      const auto prm = lower_bound_adv_params(spec.K, T, spec.alpha, spec.soft_u);
      const double u = rng.uniform();
      if (u < prm.eta)
        std::fill(row.begin(), row.end(), -1.0);
      else if (u < prm.eta + prm.epsilon)
        row[static_cast<std::size_t>(spec.best_arm)] = -1.0;
      break;
    }
  }
  return out;
}

inline double variation_q(const std::vector<double>& matrix, long long T, int K) {
  const auto k = static_cast<std::size_t>(K);
  std::vector<double> mean(k, 0.0);
  for (long long t = 0; t < T; ++t)
    for (std::size_t i = 0; i < k; ++i) mean[i] += matrix[static_cast<std::size_t>(t) * k + i];
  for (auto& m : mean) m /= static_cast<double>(T);
  double q = 0.0;
  for (long long t = 0; t < T; ++t)
    for (std::size_t i = 0; i < k; ++i) {
      const double d = matrix[static_cast<std::size_t>(t) * k + i] - mean[i];
      q += d * d;
    }
  return q;
}

class Environment {
 public:
  Environment(const EnvSpec& spec, long long T, std::uint64_t seed)
      : spec_(spec), T_(T) {
    validate(spec_, T_);
    const auto K = static_cast<std::size_t>(spec_.K);
    matrix_.assign(static_cast<std::size_t>(T_) * K, 0.0);
    Rng rng(seed);
    if (spec_.kind == EnvKind::kVariationBounded) {
      build_variation(rng);
    } else {
      for (long long t = 1; t <= T_; ++t) {
        auto r = env_emit_round(spec_, t, T_, rng);
        std::copy(r.loss.begin(), r.loss.end(), row_ptr(t));
        if (r.active) active_.push_back(std::move(*r.active));
      }
    }
    if (spec_.kind == EnvKind::kSelfBounding) corrupt();
  }

  int K() const { return spec_.K; }
  long long T() const { return T_; }
  const EnvSpec& spec() const { return spec_; }
  bool sleeping() const { return !active_.empty(); }
  double rho() const { return rho_; }

  const double* loss(long long t) const {
    return matrix_.data() + static_cast<std::size_t>(t - 1) * static_cast<std::size_t>(spec_.K);
  }
  const std::vector<char>* active(long long t) const {
    return active_.empty() ? nullptr : &active_[static_cast<std::size_t>(t - 1)];
  }
  const std::vector<double>& matrix() const { return matrix_; }
  const std::vector<std::vector<char>>& availability() const { return active_; }

  // Smallest positive gap for the stochastic families, NaN otherwise.
  double delta_min() const {
    if (spec_.kind == EnvKind::kLowerBoundStochastic)
      return lower_bound_delta_min(spec_.K, spec_.alpha, spec_.soft_u);
    if (spec_.kind == EnvKind::kStochasticGaps || spec_.kind == EnvKind::kSelfBounding ||
        (spec_.kind == EnvKind::kSleeping && spec_.loss_matrix.empty())) {
      if (spec_.gaps.empty()) return std::numeric_limits<double>::quiet_NaN();
      const double lo = *std::min_element(spec_.gaps.begin(), spec_.gaps.end());
      double best = std::numeric_limits<double>::infinity();
      for (double g : spec_.gaps)
        if (g - lo > 0.0) best = std::min(best, g - lo);
      return std::isfinite(best) ? best : std::numeric_limits<double>::quiet_NaN();
    }
    return std::numeric_limits<double>::quiet_NaN();
  }

 private:
  double* row_ptr(long long t) {
    return matrix_.data() + static_cast<std::size_t>(t - 1) * static_cast<std::size_t>(spec_.K);
  }

  void build_variation(Rng& rng) {
    const auto K = static_cast<std::size_t>(spec_.K);
    std::vector<double> noise(matrix_.size());
    for (auto& v : noise) v = 2.0 * rng.uniform() - 1.0;
    auto fill = [&](double rho) {
      for (std::size_t j = 0; j < matrix_.size(); ++j)
        matrix_[j] = std::clamp(spec_.anchor[j % K] + rho * noise[j], 0.0, 1.0);
      return variation_q(matrix_, T_, spec_.K);
    };
    const double target = spec_.q_target;
    double lo = 0.0;
    double hi = 1.0;
    if (fill(hi) < target)
      throw ConfigError("Q target unreachable with losses clipped to [0,1]");
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      const double q = fill(mid);
      if (std::abs(q - target) <= 1e-3 * std::max(target, 1e-12)) {
        lo = hi = mid;
        break;
      }
      if (q < target) lo = mid; else hi = mid;
    }
    rho_ = 0.5 * (lo + hi);
    const double q = fill(rho_);
    if (std::abs(q - target) > 0.05 * target)
      throw ConfigError("could not calibrate Q within 5% of the target");
  }

  // Spends the corruption budget C from the first round on: the best arm is
  // made to look worst until the budget runs out.
  void corrupt() {
    const auto K = static_cast<std::size_t>(spec_.K);
    std::size_t best = 0;
    if (!spec_.gaps.empty())
      best = static_cast<std::size_t>(
          std::min_element(spec_.gaps.begin(), spec_.gaps.end()) - spec_.gaps.begin());
    double budget = spec_.corruption;
    for (long long t = 1; t <= T_ && budget > 0.0; ++t) {
      double* row = row_ptr(t);
      double change = 0.0;
      std::vector<double> next(row, row + K);
      for (std::size_t i = 0; i < K; ++i) next[i] = i == best ? 1.0 : 0.0;
      for (std::size_t i = 0; i < K; ++i) change = std::max(change, std::abs(next[i] - row[i]));
      if (change > budget) break;
      budget -= change;
      std::copy(next.begin(), next.end(), row);
    }
  }

  EnvSpec spec_;
  long long T_;
  std::vector<double> matrix_;
  std::vector<std::vector<char>> active_;
  double rho_ = 0.0;
};

struct EnvMetrics {
  int S_max = 0;
  double soft_sparsity = 0.0;  // mean of (sum_i |l_i|^{2/alpha})^alpha
  double Q = 0.0;
  double Q_inf_upper = 0.0;    // grid upper estimate of Q_infinity
  double L_star = 0.0;
  int best_arm = 0;
  double delta_min = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> arm_totals;
};

inline EnvMetrics compute_metrics(const Environment& env, double alpha) {
  const auto K = static_cast<std::size_t>(env.K());
  const long long T = env.T();
  const auto& m = env.matrix();
  EnvMetrics out;
  out.arm_totals.assign(K, 0.0);
  double soft = 0.0;
  for (long long t = 1; t <= T; ++t) {
    const double* row = env.loss(t);
    int nnz = 0;
    double s = 0.0;
    for (std::size_t i = 0; i < K; ++i) {
      if (row[i] != 0.0) ++nnz;
      s += std::pow(std::abs(row[i]), 2.0 / alpha);
      out.arm_totals[i] += row[i];
    }
    out.S_max = std::max(out.S_max, nnz);
    soft += std::pow(s, alpha);
  }
  out.soft_sparsity = soft / static_cast<double>(T);
  out.Q = variation_q(m, T, env.K());

  // Per-coordinate anchor from the separable relaxation, snapped to the
  // 1e-3 grid in [0,1], then evaluated on the exact max-norm objective.
  std::vector<double> anchor(K);
  for (std::size_t i = 0; i < K; ++i) {
    const double mean = out.arm_totals[i] / static_cast<double>(T);
    anchor[i] = std::clamp(std::round(mean * 1000.0) / 1000.0, 0.0, 1.0);
  }
  for (long long t = 1; t <= T; ++t) {
    const double* row = env.loss(t);
    double mx = 0.0;
    for (std::size_t i = 0; i < K; ++i) mx = std::max(mx, std::abs(row[i] - anchor[i]));
    out.Q_inf_upper += mx * mx;
  }
  const auto it = std::min_element(out.arm_totals.begin(), out.arm_totals.end());
  out.L_star = *it;
  out.best_arm = static_cast<int>(it - out.arm_totals.begin());
  out.delta_min = env.delta_min();
  return out;
}

struct SoftSparsityReport {
  std::size_t samples = 0;
  double mean = 0.0;
  double standard_error = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  double U = 0.0;
  bool violation = false;  // the whole 3-SE interval lies above U
  bool covers_u = false;   // U inside the 3-SE interval
};

inline SoftSparsityReport verify_soft_sparsity(const std::vector<std::vector<double>>& samples,
                                               double alpha, double U) {
  SoftSparsityReport r;
  r.samples = samples.size();
  r.U = U;
  if (samples.empty()) return r;
  double sum = 0.0;
  double sum_sq = 0.0;
  for (const auto& v : samples) {
    double s = 0.0;
    for (double x : v) s += std::pow(std::abs(x), 2.0 / alpha);
    const double stat = std::pow(s, alpha);
    sum += stat;
    sum_sq += stat * stat;
  }
  const double n = static_cast<double>(samples.size());
  r.mean = sum / n;
  const double var = n > 1.0 ? std::max(0.0, (sum_sq - n * r.mean * r.mean) / (n - 1.0)) : 0.0;
  r.standard_error = std::sqrt(var / n);
  r.lower = r.mean - 3.0 * r.standard_error;
  r.upper = r.mean + 3.0 * r.standard_error;
  r.violation = r.lower > U;
  r.covers_u = r.lower <= U && U <= r.upper;
  return r;
}

inline std::vector<std::vector<double>> read_csv_matrix(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open CSV file " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw ConfigError("non-numeric CSV cell '" + cell + "' in " + path);
      }
    }
    if (!row.empty()) rows.push_back(std::move(row));
  }
  return rows;
}

inline std::vector<std::vector<char>> read_csv_mask(const std::string& path) {
  std::vector<std::vector<char>> out;
  for (const auto& row : read_csv_matrix(path)) {
    std::vector<char> r;
    for (double v : row) {
      if (v != 0.0 && v != 1.0) throw ConfigError("availability masks must be 0/1");
      r.push_back(v != 0.0 ? 1 : 0);
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace spm
