#pragma once

// Independent references and verifiers. Nothing here calls the solver or
// the SPM formulas under test; objectives, rates and bounds are recomputed
// from their definitions.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "spm/errors.hpp"
#include "spm/learners.hpp"
#include "spm/rng.hpp"
#include "spm/simplex.hpp"

namespace spm {

struct LemmaReport {
  std::string id;
  long long trials = 0;
  long long violations = 0;
  double worst_slack = std::numeric_limits<double>::infinity();
  nlohmann::json witness;

  bool passed() const { return violations == 0; }

  // slack >= -tolerance counts as satisfied; the smallest slack is kept
  // together with its inputs.
  void record(double slack, double tolerance, const nlohmann::json& inputs) {
    ++trials;
    if (slack < -tolerance) ++violations;
    if (slack < worst_slack) {
      worst_slack = slack;
      witness = inputs;
    }
  }

  nlohmann::json to_json() const {
    return {{"lemma", id},
            {"trials", trials},
            {"violations", violations},
            {"worst_slack", std::isfinite(worst_slack) ? nlohmann::json(worst_slack)
                                                       : nlohmann::json(nullptr)},
            {"witness", witness},
            {"passed", passed()}};
  }
};

// ---------------------------------------------------------------------------
// Simplex oracles

inline double oracle_objective(const FtrlProblem& problem, const std::vector<double>& x) {
  double f = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const auto& pot = problem.potentials[i];
    const double xi = x[i];
    double reg = -pot.gamma * std::log(xi);
    if (pot.kind == PotentialKind::kTsallisLogBarrier) {
      reg += -(pot.beta / pot.alpha) * std::pow(xi, pot.alpha);
    } else {
      const double ent = xi < 1.0 ? (1.0 - xi) * std::log(1.0 - xi) : 0.0;
      reg += pot.beta * (-std::pow(xi, pot.alpha) / pot.alpha + ent + xi);
    }
    f += problem.offsets[i] * xi + reg;
  }
  return f;
}

// Golden-section search on x_1 for two coordinates.
inline ProbVector golden_section_k2(const FtrlProblem& problem, double tol = 1e-9) {
  if (problem.size() != 2) throw Error("golden-section oracle needs K = 2");
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  auto f = [&](double x) { return oracle_objective(problem, {x, 1.0 - x}); };
  double a = 1e-15;
  double b = 1.0 - 1e-15;
  double c = b - phi * (b - a);
  double d = a + phi * (b - a);
  double fc = f(c);
  double fd = f(d);
  while (b - a > tol) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + phi * (b - a);
      fd = f(d);
    }
  }
  const double x = 0.5 * (a + b);
  return {x, 1.0 - x};
}

// Grid search over the simplex for K in {2,3}: a 1e-2 grid, then two
// refinement passes around the incumbent, each shrinking the step by the
// same factor down to `resolution`.
inline ProbVector brute_force_simplex_min(const FtrlProblem& problem,
                                          double resolution = 1e-6) {
  const std::size_t K = problem.size();
  if (K != 2 && K != 3) throw Error("brute-force oracle supports K in {2,3}");
  if (!(resolution > 0.0 && resolution <= 1e-4))
    throw Error("resolution must lie in (0, 1e-4]");
  const double coarse = 1e-2;
  const double factor = std::sqrt(coarse / resolution);
  const double steps[3] = {coarse, coarse / factor, resolution};

  std::vector<double> best(K, 1.0 / static_cast<double>(K));
  double best_f = std::numeric_limits<double>::infinity();
  auto consider = [&](const std::vector<double>& x) {
    for (double v : x)
      if (!(v > 0.0 && v < 1.0)) return;
    const double f = oracle_objective(problem, x);
    if (f < best_f) {
      best_f = f;
      best = x;
    }
  };

  for (int pass = 0; pass < 3; ++pass) {
    const double h = steps[pass];
    double lo1 = h;
    double hi1 = 1.0 - h;
    double lo2 = h;
    double hi2 = 1.0 - h;
    if (pass > 0) {
      const double w = 2.0 * steps[pass - 1];
      lo1 = std::max(best[0] - w, 0.0);
      hi1 = std::min(best[0] + w, 1.0);
      if (K == 3) {
        lo2 = std::max(best[1] - w, 0.0);
        hi2 = std::min(best[1] + w, 1.0);
      }
    }
    const auto n1 = static_cast<long long>(std::floor((hi1 - lo1) / h));
    const auto n2 = static_cast<long long>(std::floor((hi2 - lo2) / h));
    for (long long a = 0; a <= n1; ++a) {
      const double x1 = lo1 + static_cast<double>(a) * h;
      if (K == 2) {
        consider({x1, 1.0 - x1});
        continue;
      }
      for (long long b = 0; b <= n2; ++b) {
        const double x2 = lo2 + static_cast<double>(b) * h;
        consider({x1, x2, 1.0 - x1 - x2});
      }
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Learning-rate lemma

inline LemmaReport check_lemma1(const std::vector<double>& z, const std::vector<double>& h,
                                double beta1) {
  LemmaReport rep;
  rep.id = "lemma1_real_time_spm";
  const std::size_t T = z.size();
  double beta = beta1;
  double F = 0.0;
  double G = 0.0;
  double ratio_max = 0.0;
  double zh = 0.0;  // sum_{s<=t} z_s/h_s
  for (std::size_t t = 0; t < T; ++t) {
    F += z[t] / beta;
    ratio_max = std::max(ratio_max, z[t] / beta);
    zh += z[t] / h[t];
    if (zh > 0.0) G += z[t] / std::sqrt(zh);
    beta = beta + z[t] / (beta * h[t]);
  }
  const double bp_first = beta1;
  const double bp_last = std::sqrt(beta1 * beta1 + 2.0 * zh);
  const double rounds_in_e = 2.0 * std::log2(bp_last / bp_first);
  const double rhs = G + ratio_max * rounds_in_e;
  rep.record(rhs - F, 1e-12 * std::max(1.0, std::abs(rhs)),
             {{"T", T}, {"beta1", beta1}, {"F", F}, {"G", G}, {"bound", rhs}});
  return rep;
}

// ---------------------------------------------------------------------------
// Closed-form inequalities

inline std::vector<LemmaReport> check_technical_inequalities(long long trials, Rng& rng) {
  constexpr double kTol = 1e-12;
  constexpr double kLo = 1e-9;
  constexpr double kHi = 1.0 - 1e-9;
  auto unit = [&]() { return kLo + (kHi - kLo) * rng.uniform(); };

  LemmaReport tsallis{"x^a >= (x-1)ln(1-x)"};
  for (long long n = 0; n < trials; ++n) {
    const double x = unit();
    const double a = unit();
    const double lhs = std::pow(x, a);
    const double rhs = (x - 1.0) * std::log1p(-x);
    tsallis.record(lhs - rhs, kTol * std::max(1.0, std::abs(lhs)), {{"x", x}, {"alpha", a}});
  }

  LemmaReport concave{"a^x+b^x >= (a+b)^x, x in [0,1]"};
  LemmaReport convex{"a^x+b^x <= (a+b)^x, x >= 1"};
  for (long long n = 0; n < trials; ++n) {
    const double a = 10.0 * unit();
    const double b = 10.0 * unit();
    const double x = unit();
    const double lhs = std::pow(a, x) + std::pow(b, x);
    const double rhs = std::pow(a + b, x);
    concave.record(lhs - rhs, kTol * std::max(1.0, rhs), {{"a", a}, {"b", b}, {"x", x}});
    const double y = 1.0 + 9.0 * rng.uniform();
    const double lhs2 = std::pow(a, y) + std::pow(b, y);
    const double rhs2 = std::pow(a + b, y);
    convex.record(rhs2 - lhs2, kTol * std::max(1.0, rhs2), {{"a", a}, {"b", b}, {"x", y}});
  }

  LemmaReport halving{"g(x)-1 >= g(2x), gamma >= 2"};
  for (long long n = 0; n < trials; ++n) {
    const double x = unit();
    const double alpha = unit();
    const double beta = 100.0 * rng.uniform();
    const double gamma = 2.0 + 98.0 * rng.uniform();
    auto g = [&](double v) { return beta * std::pow(v, alpha - 1.0) + gamma / v; };
    const double lhs = g(x) - 1.0;
    const double rhs = g(2.0 * x);
    halving.record(lhs - rhs, kTol * std::max(1.0, std::abs(lhs)),
                   {{"x", x}, {"alpha", alpha}, {"beta", beta}, {"gamma", gamma}});
  }
  return {tsallis, concave, convex, halving};
}

// ---------------------------------------------------------------------------
// Trajectory lemmas

struct Trajectory {
  LearnerId learner = LearnerId::kAlg1;
  SpmConfig config;
  std::vector<RoundRecord> rounds;
  std::vector<std::vector<double>> losses;  // true loss vector of every round
};

namespace detail {

inline void require_capture(const Trajectory& tr) {
  if (tr.rounds.empty()) throw MissingCapture("trajectory has no rounds");
  if (tr.losses.size() != tr.rounds.size())
    throw MissingCapture("trajectory lacks the true loss vectors");
  const auto K = static_cast<std::size_t>(tr.config.K);
  for (const auto& r : tr.rounds) {
    if (r.q.size() != K || r.p.size() != K || r.beta.empty() || r.beta_next.empty() ||
        r.z.empty() || r.h.empty())
      throw MissingCapture("round " + std::to_string(r.t) + " lacks q/p/beta/z/h");
  }
}

inline double max_ratio_slack(const RoundRecord& now, const RoundRecord& next,
                              double factor, std::size_t* where) {
  double worst = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < now.q.size(); ++i) {
    const double s = factor * now.q[i] - next.q[i];
    if (s < worst) {
      worst = s;
      *where = i;
    }
  }
  return worst;
}

}  // namespace detail

inline std::vector<LemmaReport> check_trajectory_lemmas(const Trajectory& tr) {
  detail::require_capture(tr);
  constexpr double kSlack = 1e-8;
  const auto& cfg = tr.config;
  const double a = cfg.alpha;
  const std::size_t K = static_cast<std::size_t>(cfg.K);
  const std::size_t n = tr.rounds.size();
  std::vector<LemmaReport> out;

  if (tr.learner == LearnerId::kAlg1) {
    LemmaReport stab{"alg1: q_{t+1,i} <= 3d q_{t,i}"};
    LemmaReport inc{"alg1: beta increment <= (1-1/d) gamma q_*^{-alpha}"};
    LemmaReport floor{"alg1: h_t >= (1-alpha)/(4 alpha) T^{-alpha}"};
    LemmaReport cap{"alg1: E[z_t] <= (6d)^{2-alpha}/(2(1-alpha)) S^alpha"};
    const double h_floor = (1.0 - a) / (4.0 * a) * std::pow(static_cast<double>(cfg.T), -a);
    const double coef = std::pow(6.0 * cfg.d, 2.0 - a) / (2.0 * (1.0 - a));
    for (std::size_t t = 0; t < n; ++t) {
      const auto& r = tr.rounds[t];
      if (t + 1 < n) {
        std::size_t i = 0;
        const double s = detail::max_ratio_slack(r, tr.rounds[t + 1], 3.0 * cfg.d, &i);
        stab.record(s, kSlack, {{"t", r.t}, {"arm", i}});
      }
      const double qmax = *std::max_element(r.q.begin(), r.q.end());
      const double qstar = std::min(qmax, 1.0 - qmax);
      const double bound = (1.0 - 1.0 / cfg.d) * cfg.gamma * std::pow(qstar, -a);
      inc.record(bound - (r.beta_next[0] - r.beta[0]), kSlack, {{"t", r.t}, {"q_star", qstar}});

      double hsum = 0.0;
      for (double v : r.p) hsum += std::pow(v, a);
      floor.record((hsum - 1.0) / a - h_floor, kSlack, {{"t", r.t}});

      // Exact expectation over the K possible draws against the true losses.
      const auto& l = tr.losses[t];
      double ez = 0.0;
      int support = 0;
      for (std::size_t i = 0; i < K; ++i) {
        if (l[i] != 0.0) ++support;
        const double p = r.p[i];
        const double pt = std::min(p, 1.0 - p);
        const double lh = l[i] / p;
        const double zi = std::min(coef * std::pow(pt, 2.0 - a) * lh * lh,
                                   r.beta[0] * 18.0 * cfg.d * cfg.d / cfg.gamma * l[i] * l[i]);
        ez += p * zi;
      }
      cap.record(coef * std::pow(static_cast<double>(support), a) - ez, kSlack,
                 {{"t", r.t}, {"S", support}});
    }
    out = {stab, inc, floor, cap};
  } else if (tr.learner == LearnerId::kAlg3) {
    LemmaReport only{"alg3: beta_i changes only at I_t"};
    LemmaReport hdef{"alg3: h_{t,i} = p_{t,i}^alpha/alpha"};
    LemmaReport mono{"alg3: h_{t+1,I} <= 6^alpha h_{t,I} when q_{t+1,I} <= 6 q_{t,I}"};
    for (std::size_t t = 0; t < n; ++t) {
      const auto& r = tr.rounds[t];
      if (r.beta.size() != K || r.h.size() != K)
        throw MissingCapture("coordinate-wise rounds need per-arm beta and h");
      double changed_elsewhere = 0.0;
      for (std::size_t i = 0; i < K; ++i)
        if (static_cast<int>(i) != r.arm && r.beta_next[i] != r.beta[i])
          changed_elsewhere = -1.0;
      only.record(changed_elsewhere, 0.0, {{"t", r.t}});
      for (std::size_t i = 0; i < K; ++i) {
        const double expect = std::pow(r.p[i], a) / a;
        hdef.record(-std::abs(r.h[i] - expect), 1e-12, {{"t", r.t}, {"arm", i}});
      }
      if (t + 1 < n) {
        const auto I = static_cast<std::size_t>(r.arm);
        const auto& nx = tr.rounds[t + 1];
        if (nx.q[I] <= 6.0 * r.q[I])
          mono.record(std::pow(6.0, a) * r.h[I] - nx.h[I], kSlack, {{"t", r.t}});
      }
    }
    out = {only, hdef, mono};
  } else if (tr.learner == LearnerId::kAlg4) {
    LemmaReport stab{"alg4: q_{t+1,i} <= 4d q_{t,i}"};
    LemmaReport filt{"alg4: <lhat_t, q_t> = l_{t,I_t}"};
    LemmaReport supp{"alg4: p_t sums to 1 on A_t and vanishes off A_t"};
    for (std::size_t t = 0; t < n; ++t) {
      const auto& r = tr.rounds[t];
      if (r.active.size() != K || r.lhat.size() != K)
        throw MissingCapture("sleeping rounds need the active set and estimates");
      if (t + 1 < n) {
        std::size_t i = 0;
        const double s = detail::max_ratio_slack(r, tr.rounds[t + 1], 4.0 * cfg.d, &i);
        stab.record(s, kSlack, {{"t", r.t}, {"arm", i}});
      }
      double inner = 0.0;
      for (std::size_t i = 0; i < K; ++i) inner += r.lhat[i] * r.q[i];
      filt.record(-std::abs(inner - r.loss), 1e-10, {{"t", r.t}});
      double on = 0.0;
      double off = 0.0;
      for (std::size_t i = 0; i < K; ++i) (r.active[i] ? on : off) += r.p[i];
      supp.record(-std::max(std::abs(on - 1.0), off), 1e-12, {{"t", r.t}});
    }
    out = {stab, filt, supp};
  } else {
    throw Error(std::string("no trajectory lemmas for ") + to_string(tr.learner));
  }
  return out;
}

}  // namespace spm
