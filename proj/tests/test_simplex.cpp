#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "spm/oracles.hpp"
#include "spm/rng.hpp"
#include "spm/simplex.hpp"

using spm::CoordinatePotential;
using spm::FtrlProblem;

namespace {

// Frozen by tests/oracle/freeze_values.py (50-digit golden section and bisection).
constexpr double kTwoArmQ1 = 0.52103973662164986016;
constexpr double kInverseAtMinus200 = 0.33222191133434148222;

FtrlProblem identical(std::vector<double> offsets, CoordinatePotential pot) {
  FtrlProblem p;
  p.potentials.assign(offsets.size(), pot);
  p.offsets = std::move(offsets);
  return p;
}

FtrlProblem random_problem(spm::Rng& rng, int K, spm::PotentialKind kind) {
  FtrlProblem p;
  for (int i = 0; i < K; ++i) {
    p.offsets.push_back(-10.0 + 20.0 * rng.uniform());
    const double beta = 1.0 + 99.0 * rng.uniform();
    const double gamma = 1.0 + 99.0 * rng.uniform();
    const double alpha = 0.05 + 0.9 * rng.uniform();
    p.potentials.push_back({kind, beta, gamma, alpha});
  }
  return p;
}

double sum(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

}  // namespace

TEST_CASE("zero offsets with identical potentials give the uniform vector") {
  for (auto pot : {CoordinatePotential::tsallis_log_barrier(10, 5, 0.5),
                   CoordinatePotential::coordinate_wise_hybrid(10, 5, 0.7)}) {
    const auto p = spm::solve_ftrl(identical({0, 0, 0}, pot));
    for (double v : p) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  }
}

TEST_CASE("swapping offsets swaps the solution") {
  const auto pot = CoordinatePotential::tsallis_log_barrier(4, 2, 0.5);
  const auto a = spm::solve_ftrl(identical({1, 0, 0}, pot));
  const auto b = spm::solve_ftrl(identical({0, 1, 0}, pot));
  CHECK(a[0] == doctest::Approx(b[1]).epsilon(1e-12));
  CHECK(a[1] == doctest::Approx(b[0]).epsilon(1e-12));
  CHECK(a[2] == doctest::Approx(b[2]).epsilon(1e-12));
}

TEST_CASE("two-arm instance matches the frozen golden-section minimizer") {
  const auto pot = CoordinatePotential::tsallis_log_barrier(32, 48, 0.5);
  const auto problem = identical({0, 10}, pot);
  const auto p = spm::solve_ftrl(problem);
  CHECK(std::abs(p[0] - kTwoArmQ1) < 1e-9);
  CHECK(std::abs(spm::golden_section_k2(problem)[0] - kTwoArmQ1) < 1e-8);
}

TEST_CASE("potential inversion") {
  const auto pot = CoordinatePotential::tsallis_log_barrier(32, 48, 0.5);
  CHECK(spm::invert_potential(pot, pot.derivative(0.5)) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(std::abs(spm::invert_potential(pot, -200.0) - kInverseAtMinus200) < 1e-12);

  SUBCASE("monotone in the target") {
    spm::Rng rng(3);
    for (int i = 0; i < 500; ++i) {
      const double t1 = -1000.0 * rng.uniform() - 81.0;
      const double t2 = t1 + 1e-3 + rng.uniform();
      if (t2 >= pot.derivative(spm::kXMax)) continue;
      CHECK(spm::invert_potential(pot, t1) < spm::invert_potential(pot, t2));
    }
  }
  SUBCASE("hybrid potential round-trips") {
    const auto hyb = CoordinatePotential::coordinate_wise_hybrid(7, 3, 0.8);
    for (double x : {1e-6, 1e-3, 0.2, 0.5, 0.9, 0.999}) {
      const double back = spm::invert_potential(hyb, hyb.derivative(x));
      CHECK(back == doctest::Approx(x).epsilon(1e-9));
    }
  }
  SUBCASE("targets outside the range are rejected") {
    CHECK_THROWS_AS(spm::invert_potential(pot, 0.0), spm::OutOfRange);
    CHECK_THROWS_AS(spm::invert_potential(pot, -1e300), spm::OutOfRange);
    CHECK_THROWS_AS(spm::invert_potential(pot, NAN), spm::OutOfRange);
  }
}

TEST_CASE("invalid potentials are rejected") {
  CHECK_THROWS_AS(CoordinatePotential::tsallis_log_barrier(1, 1, 1.0).validate(),
                  spm::InvalidPotential);
  CHECK_THROWS_AS(CoordinatePotential::tsallis_log_barrier(0, 1, 0.5).validate(),
                  spm::InvalidPotential);
  CHECK_THROWS_AS(CoordinatePotential::tsallis_log_barrier(1, -1, 0.5).validate(),
                  spm::InvalidPotential);
  const auto pot = CoordinatePotential::tsallis_log_barrier(1, 1, 0.5);
  CHECK_THROWS_AS(spm::solve_ftrl(identical({0}, pot)), spm::InvalidPotential);
  CHECK_THROWS_AS(spm::solve_ftrl(identical({0, INFINITY}, pot)), spm::InvalidPotential);
}

TEST_CASE("random problems: simplex membership, KKT and the brute-force oracle") {
  spm::Rng rng(17);
  for (int trial = 0; trial < 60; ++trial) {
    const int K = 2 + static_cast<int>(rng.below(2));
    const auto kind = trial % 2 ? spm::PotentialKind::kCoordinateWiseHybrid
                                : spm::PotentialKind::kTsallisLogBarrier;
    const auto problem = random_problem(rng, K, kind);
    spm::FtrlSolver solver;
    const auto p = solver.solve(problem);
    CHECK(sum(p) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(spm::kkt_residual(problem, p, solver.lambda()) <= 1e-8);
    const auto ref = spm::brute_force_simplex_min(problem);
    for (int i = 0; i < K; ++i) CHECK(std::abs(p[i] - ref[i]) < 1e-4);
  }
}

TEST_CASE("adding a constant to every offset leaves the solution unchanged") {
  spm::Rng rng(23);
  for (int trial = 0; trial < 50; ++trial) {
    const int K = 2 + static_cast<int>(rng.below(30));
    auto problem = random_problem(rng, K, spm::PotentialKind::kTsallisLogBarrier);
    const auto p = spm::solve_ftrl(problem);
    const double shift = -50.0 + 100.0 * rng.uniform();
    for (auto& o : problem.offsets) o += shift;
    const auto q = spm::solve_ftrl(problem);
    for (int i = 0; i < K; ++i) CHECK(q[i] == doctest::Approx(p[i]).epsilon(1e-8));
  }
}

TEST_CASE("permuting coordinates permutes the solution") {
  spm::Rng rng(29);
  for (int trial = 0; trial < 30; ++trial) {
    const int K = 3 + static_cast<int>(rng.below(10));
    const auto problem = random_problem(rng, K, spm::PotentialKind::kCoordinateWiseHybrid);
    std::vector<int> perm(K);
    std::iota(perm.begin(), perm.end(), 0);
    for (int i = K - 1; i > 0; --i) std::swap(perm[i], perm[rng.below(i + 1)]);
    FtrlProblem permuted;
    for (int i = 0; i < K; ++i) {
      permuted.offsets.push_back(problem.offsets[perm[i]]);
      permuted.potentials.push_back(problem.potentials[perm[i]]);
    }
    const auto p = spm::solve_ftrl(problem);
    const auto q = spm::solve_ftrl(permuted);
    for (int i = 0; i < K; ++i) CHECK(q[i] == doctest::Approx(p[perm[i]]).epsilon(1e-8));
  }
}

TEST_CASE("warm starts reach the same point as cold solves") {
  spm::Rng rng(31);
  spm::FtrlSolver warm;
  auto problem = random_problem(rng, 16, spm::PotentialKind::kTsallisLogBarrier);
  for (int step = 0; step < 200; ++step) {
    problem.offsets[rng.below(16)] += 5.0 * rng.uniform();
    const auto a = warm.solve(problem);
    const auto b = spm::solve_ftrl(problem);
    for (int i = 0; i < 16; ++i) REQUIRE(a[i] == doctest::Approx(b[i]).epsilon(1e-9));
  }
  CHECK(warm.warm());
}

TEST_CASE("extreme offsets saturate without leaving the simplex") {
  const auto pot = CoordinatePotential::tsallis_log_barrier(1, 1e-3, 0.5);
  spm::FtrlSolver solver;
  const auto p = solver.solve(identical({0, 1e9, 1e9, 1e9}, pot));
  CHECK(sum(p) == doctest::Approx(1.0).epsilon(1e-12));
  for (double v : p) {
    CHECK(v >= spm::kXMin);
    CHECK(v <= spm::kXMax);
  }
  CHECK(p[0] > 0.999);
}
