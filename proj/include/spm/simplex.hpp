#pragma once

// Per-round FTRL step over the probability simplex for separable regularizers
// whose coordinate potentials carry a log-barrier at 0.
//
// Stationarity reads offset_i + f_i'(x_i) + lambda = 0 for a single multiplier
// lambda. Each f_i' is strictly increasing, so x_i(lambda) is strictly
// decreasing and lambda is found by a bracketed Newton search on
// sum_i x_i(lambda) = 1. Every x_i(lambda) is itself a bracketed Newton
// inversion of f_i'.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "spm/errors.hpp"

namespace spm {

using ProbVector = std::vector<double>;

inline constexpr double kXMin = 1e-16;
inline constexpr double kXMax = 1.0 - 1e-16;

enum class PotentialKind {
  kTsallisLogBarrier,     // -(beta/alpha) x^alpha - gamma ln x
  kCoordinateWiseHybrid,  // beta (-x^alpha/alpha + (1-x) ln(1-x) + x) - gamma ln x
};

struct CoordinatePotential {
  PotentialKind kind = PotentialKind::kTsallisLogBarrier;
  double beta = 1.0;
  double gamma = 1.0;
  double alpha = 0.5;

  static CoordinatePotential tsallis_log_barrier(double beta, double gamma,
                                                 double alpha) {
    return {PotentialKind::kTsallisLogBarrier, beta, gamma, alpha};
  }
  static CoordinatePotential coordinate_wise_hybrid(double beta, double gamma,
                                                    double alpha) {
    return {PotentialKind::kCoordinateWiseHybrid, beta, gamma, alpha};
  }

  void validate() const {
    if (!(alpha > 0.0 && alpha < 1.0))
      throw InvalidPotential("alpha must lie in (0,1), got " + std::to_string(alpha));
    if (!(beta > 0.0 && std::isfinite(beta)))
      throw InvalidPotential("beta must be positive, got " + std::to_string(beta));
    if (!(gamma > 0.0 && std::isfinite(gamma)))
      throw InvalidPotential("gamma must be positive, got " + std::to_string(gamma));
  }

  double derivative(double x) const {
    x = std::clamp(x, kXMin, kXMax);
    double d = -beta * std::pow(x, alpha - 1.0) - gamma / x;
    if (kind == PotentialKind::kCoordinateWiseHybrid) d -= beta * std::log1p(-x);
    return d;
  }

  double second_derivative(double x) const {
    x = std::clamp(x, kXMin, kXMax);
    double d2 = beta * (1.0 - alpha) * std::pow(x, alpha - 2.0) + gamma / (x * x);
    if (kind == PotentialKind::kCoordinateWiseHybrid) d2 += beta / (1.0 - x);
    return d2;
  }
};

struct FtrlProblem {
  std::vector<double> offsets;
  std::vector<CoordinatePotential> potentials;

  std::size_t size() const { return offsets.size(); }

  void validate() const {
    if (offsets.size() < 2)
      throw InvalidPotential("problem needs at least two coordinates");
    if (potentials.size() != offsets.size())
      throw InvalidPotential("one potential per coordinate is required");
    for (const auto& pot : potentials) pot.validate();
    for (double o : offsets)
      if (!std::isfinite(o)) throw InvalidPotential("offsets must be finite");
  }
};

namespace detail {

// Solves pot.derivative(x) = target for x strictly inside the clamp domain,
// assuming derivative(kXMin) < target < derivative(kXMax).
inline double invert_bracketed(const CoordinatePotential& pot, double target,
                               double hint) {
  double lo = kXMin;
  double hi = kXMax;
  double x = hint;
  if (!(x > lo && x < hi)) {
    x = target < 0.0 ? std::min(pot.gamma / -target, 0.5) : 0.5;
    x = std::clamp(x, 2.0 * kXMin, 0.5);
  }
  const double tol = 1e-12 * std::max(1.0, std::abs(target));
  double best_x = x;
  double best_r = std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < 400; ++iter) {
    const double r = pot.derivative(x) - target;
    if (std::abs(r) < best_r) {
      best_r = std::abs(r);
      best_x = x;
    }
    if (best_r <= tol) return best_x;
    if (r < 0.0) lo = x; else hi = x;
    if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * hi) return best_x;
    double next = x - r / pot.second_derivative(x);
    if (!(next > lo && next < hi)) {
      next = (hi > 16.0 * lo) ? std::sqrt(lo * hi) : 0.5 * (lo + hi);
    }
    if (next == x) return best_x;
    x = next;
  }
  return best_x;
}

}  // namespace detail

// Returns x in (0,1) with derivative(x) = target to a relative accuracy of
// 1e-12. Targets outside the derivative's range on the clamped domain raise
// OutOfRange. A hint in (0,1) warm-starts Newton.
inline double invert_potential(const CoordinatePotential& pot, double target,
                               double hint = -1.0) {
  pot.validate();
  if (!std::isfinite(target))
    throw OutOfRange("target must be finite");
  const double f_lo = pot.derivative(kXMin);
  const double f_hi = pot.derivative(kXMax);
  if (target <= f_lo)
    throw OutOfRange("target " + std::to_string(target) + " below derivative range");
  if (target >= f_hi)
    throw OutOfRange("target " + std::to_string(target) + " above derivative range");
  return detail::invert_bracketed(pot, target, hint);
}

inline double kkt_residual(const FtrlProblem& problem, const ProbVector& p,
                           double lambda) {
  double worst = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double r =
        problem.offsets[i] + problem.potentials[i].derivative(p[i]) + lambda;
    worst = std::max(worst, std::abs(r));
  }
  return worst;
}

// Stateful solver that warm-starts from the previous call. Results are a
// deterministic function of the call sequence, so the warm-start state is
// part of a learner checkpoint.
class FtrlSolver {
 public:
  static constexpr int kMaxOuterIterations = 200;

  const ProbVector& solve(const FtrlProblem& problem, double tol = 1e-10) {
    problem.validate();
    if (!(tol > 0.0)) throw NonConvergence("tolerance must be positive");
    const std::size_t k = problem.size();
    if (x_.size() != k) {
      x_.assign(k, 1.0 / static_cast<double>(k));
      warm_ = false;
    }
    lo_.resize(k);
    hi_.resize(k);
    for (std::size_t i = 0; i < k; ++i) {
      lo_[i] = problem.potentials[i].derivative(kXMin);
      hi_[i] = problem.potentials[i].derivative(kXMax);
    }

    const double min_offset =
        *std::min_element(problem.offsets.begin(), problem.offsets.end());
    double lambda = warm_ && std::isfinite(lambda_) ? lambda_ : -min_offset;
    double lam_lo = -std::numeric_limits<double>::infinity();  // sum > 1 here
    double lam_hi = std::numeric_limits<double>::infinity();   // sum < 1 here
    double step = 1.0;
    const double stop = std::min(tol, 1e-14 * static_cast<double>(k));

    for (iterations_ = 1; iterations_ <= kMaxOuterIterations; ++iterations_) {
      double slope = 0.0;
      const double g = evaluate(problem, lambda, &slope);
      if (std::abs(g) <= stop) {
        lambda_ = lambda;
        warm_ = true;
        return x_;
      }
      if (g > 0.0) lam_lo = lambda; else lam_hi = lambda;

      const bool bracketed = std::isfinite(lam_lo) && std::isfinite(lam_hi);
      if (bracketed &&
          lam_hi - lam_lo <= 4.0 * std::numeric_limits<double>::epsilon() *
                                 std::max(1.0, std::abs(lambda))) {
        if (std::abs(g) <= tol) {
          lambda_ = lambda;
          warm_ = true;
          return x_;
        }
        break;
      }

      double next = slope > 0.0 ? lambda + g / slope
                                : std::numeric_limits<double>::quiet_NaN();
      if (bracketed) {
        if (!(next > lam_lo && next < lam_hi)) next = 0.5 * (lam_lo + lam_hi);
      } else if (std::isfinite(lam_lo)) {
        if (!(next > lam_lo) || !std::isfinite(next)) {
          next = lam_lo + step;
          step *= 2.0;
        }
      } else {
        if (!(next < lam_hi) || !std::isfinite(next)) {
          next = lam_hi - step;
          step *= 2.0;
        }
      }
      lambda = next;
    }
    warm_ = false;
    throw NonConvergence("multiplier search exhausted " +
                         std::to_string(kMaxOuterIterations) + " iterations");
  }

  double lambda() const { return lambda_; }
  int iterations() const { return iterations_; }
  bool warm() const { return warm_; }
  const ProbVector& last() const { return x_; }

  void reset() {
    x_.clear();
    warm_ = false;
    lambda_ = 0.0;
  }

  // Restores warm-start state captured by last() and lambda().
  void restore(const ProbVector& x, double lambda) {
    x_ = x;
    lambda_ = lambda;
    warm_ = !x.empty();
  }

 private:
  // Returns sum_i x_i(lambda) - 1 and writes d/dlambda of -sum to *slope.
  double evaluate(const FtrlProblem& problem, double lambda, double* slope) {
    double sum = 0.0;
    double s = 0.0;
    for (std::size_t i = 0; i < x_.size(); ++i) {
      const double target = -problem.offsets[i] - lambda;
      const auto& pot = problem.potentials[i];
      if (target <= lo_[i]) {
        x_[i] = kXMin;
      } else if (target >= hi_[i]) {
        x_[i] = kXMax;
      } else {
        x_[i] = detail::invert_bracketed(pot, target, x_[i]);
        s += 1.0 / pot.second_derivative(x_[i]);
      }
      sum += x_[i];
    }
    *slope = s;
    return sum - 1.0;
  }

  ProbVector x_;
  std::vector<double> lo_;
  std::vector<double> hi_;
  double lambda_ = 0.0;
  bool warm_ = false;
  int iterations_ = 0;
};

inline ProbVector solve_ftrl(const FtrlProblem& problem, double tol = 1e-10) {
  FtrlSolver solver;
  return solver.solve(problem, tol);
}

}  // namespace spm
