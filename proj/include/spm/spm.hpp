#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "spm/errors.hpp"
#include "spm/simplex.hpp"

namespace spm {

enum class LossRange { kSigned, kUnit };  // [-1,1] and [0,1]

inline const char* to_string(LossRange r) {
  return r == LossRange::kSigned ? "[-1,1]" : "[0,1]";
}

inline bool in_range(double loss, LossRange r) {
  const double lo = r == LossRange::kSigned ? -1.0 : 0.0;
  return loss >= lo && loss <= 1.0;
}

inline void check_loss(double loss, LossRange r) {
  if (!in_range(loss, r))
    throw LossOutOfRange("loss " + std::to_string(loss) + " outside " + to_string(r));
}

// kDefault is the larger (beta1, gamma) pair used by alg1 and alg5; alg6
// selects the smaller pair.
enum class ConstantSet { kDefault, kAlternate };

struct SpmConfig {
  int K = 0;
  long long T = 0;
  double alpha = 0.5;
  double beta1 = 0.0;
  double gamma = 0.0;
  double d = 2.0;

  static double default_gamma(double alpha, ConstantSet set = ConstantSet::kDefault) {
    const double floor = set == ConstantSet::kDefault ? 6.0 : 3.0;
    return std::max(floor, 48.0 * std::sqrt(alpha / (1.0 - alpha)));
  }

  static double default_beta1(int K, double alpha,
                              ConstantSet set = ConstantSet::kDefault) {
    const double scale = set == ConstantSet::kDefault ? 8.0 : 4.0;
    return scale * K / (1.0 - alpha);
  }

  static SpmConfig make(int K, long long T, double alpha,
                        ConstantSet set = ConstantSet::kDefault, double d = 2.0) {
    SpmConfig c;
    c.K = K;
    c.T = T;
    c.alpha = alpha;
    c.d = d;
    c.beta1 = default_beta1(K, alpha, set);
    c.gamma = default_gamma(alpha, set);
    c.validate();
    return c;
  }

  void validate() const {
    if (K < 3) throw ConfigError("K must be at least 3");
    if (T < 4LL * K) throw ConfigError("T must be at least 4K");
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0,1)");
    if (!(beta1 > 0.0)) throw ConfigError("beta1 must be positive");
    if (!(gamma > 0.0)) throw ConfigError("gamma must be positive");
    if (!(d >= 1.0)) throw ConfigError("d must be at least 1");
  }

  // (6d)^{2-alpha} / (2(1-alpha)), the stability coefficient of the sparse bound.
  double stability_coefficient() const {
    return std::pow(6.0 * d, 2.0 - alpha) / (2.0 * (1.0 - alpha));
  }

  // 18 d^2 / gamma, the cap on z_t / beta_t.
  double rate_cap() const { return 18.0 * d * d / gamma; }
};

inline double choose_alpha(int K, std::optional<int> S = std::nullopt) {
  const double k = static_cast<double>(K);
  if (S && std::exp(2.0) * (*S) <= k) return 1.0 - 1.0 / std::log(k / *S);
  return 1.0 - 1.0 / (2.0 * std::log(k));
}

inline ProbVector mix_exploration(const ProbVector& q, int K, long long T) {
  const double w = 1.0 - static_cast<double>(K) / static_cast<double>(T);
  const double floor = 1.0 / static_cast<double>(T);
  ProbVector p(q.size());
  for (std::size_t i = 0; i < q.size(); ++i) p[i] = w * q[i] + floor;
  return p;
}

inline double estimate_loss_iw(double loss, double p_i, bool chosen) {
  return chosen ? loss / p_i : 0.0;
}

inline double estimate_loss_optimistic(double loss, double m_i, double p_i,
                                       bool chosen) {
  return chosen ? m_i + (loss - m_i) / p_i : m_i;
}

// Inverse CDF with one uniform draw, coordinates in index order. Zero-mass
// coordinates are never returned.
inline int sample_arm(const ProbVector& p, double u) {
  double cum = 0.0;
  int last_positive = -1;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    last_positive = static_cast<int>(i);
    cum += p[i];
    if (u < cum) return static_cast<int>(i);
  }
  return last_positive;
}

inline double spm_z_sparse(double p_chosen, double lhat, double loss, double beta,
                           const SpmConfig& cfg) {
  const double ptilde = std::min(p_chosen, 1.0 - p_chosen);
  const double stab =
      cfg.stability_coefficient() * std::pow(ptilde, 2.0 - cfg.alpha) * lhat * lhat;
  const double capped = beta * cfg.rate_cap() * loss * loss;
  return std::min(stab, capped);
}

// Coordinate-wise stability of the chosen arm; every other arm gets zero.
inline double spm_z_coordinate(double p_chosen, double loss, double m_chosen,
                               double beta_chosen, const SpmConfig& cfg) {
  const double innovation = (loss - m_chosen) * (loss - m_chosen);
  const double shape = std::min(std::pow(p_chosen, -cfg.alpha),
                                (1.0 - p_chosen) / (p_chosen * p_chosen));
  return innovation * std::min(cfg.stability_coefficient() * shape,
                               beta_chosen * cfg.rate_cap());
}

// Sleeping-bandit stability: a sum over the active set, independent of the
// realized loss.
inline double spm_z_sleeping(const ProbVector& p, const std::vector<char>& active,
                             double beta, const SpmConfig& cfg) {
  double shape = 0.0;
  double mass = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!active[i]) continue;
    const double pt = std::min(p[i], 1.0 - p[i]);
    shape += std::pow(pt, 1.0 - cfg.alpha);
    mass += pt;
  }
  const double coef = std::pow(4.0 * cfg.d, 2.0 - cfg.alpha) / (1.0 - cfg.alpha);
  return std::min(coef * shape, beta * cfg.rate_cap() * mass);
}

inline double spm_h_tsallis(const ProbVector& p, double alpha) {
  double s = 0.0;
  for (double v : p) s += std::pow(v, alpha);
  return (s - 1.0) / alpha;
}

inline double spm_update_beta(double beta, double z, double h) {
  if (!(h > 1e-14))
    throw DegeneratePenalty("penalty h = " + std::to_string(h) + " is not interior");
  return beta + z / (beta * h);
}

inline double cow_predictor(long long pull_count, double loss_sum) {
  return (0.5 + loss_sum) / (1.0 + static_cast<double>(pull_count));
}

}  // namespace spm
