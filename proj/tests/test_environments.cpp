#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>

#include "spm/environments.hpp"

using spm::EnvKind;
using spm::EnvSpec;

namespace {

// Frozen by tests/oracle/freeze_values.py (root-finder on the two equalities).
constexpr double kLowerBoundEta = 0.23919290009984738749;
constexpr double kLowerBoundEps = 0.04322839960061045002;

EnvSpec stochastic(std::vector<double> gaps) {
  EnvSpec s;
  s.K = static_cast<int>(gaps.size());
  s.gaps = std::move(gaps);
  return s;
}

std::string temp_file(const std::string& name, const std::string& body) {
  const std::string path = std::string(SPM_TEST_TMPDIR) + "/" + name;
  std::ofstream(path) << body;
  return path;
}

}  // namespace

TEST_CASE("environment kind names round-trip") {
  for (auto k : {EnvKind::kStochasticGaps, EnvKind::kSelfBounding, EnvKind::kAdversarialScripted,
                 EnvKind::kSparseAdversarial, EnvKind::kSoftSparse, EnvKind::kVariationBounded,
                 EnvKind::kSleeping, EnvKind::kLowerBoundStochastic,
                 EnvKind::kLowerBoundAdversarial})
    CHECK(spm::env_kind_from_string(spm::to_string(k)) == k);
  CHECK_THROWS_AS(spm::env_kind_from_string("nope"), spm::ConfigError);
}

TEST_CASE("stochastic gaps") {
  auto spec = stochastic({0, 0.2, 0.2});
  spec.base_mean = 0.3;
  spec.base = spm::BaseDistribution::kDeterministic;
  spm::Environment det(spec, 100, 1);
  for (long long t = 1; t <= 100; ++t) {
    CHECK(det.loss(t)[1] - det.loss(t)[0] == doctest::Approx(0.2).epsilon(1e-15));
    CHECK(det.active(t) == nullptr);
  }
  CHECK(det.delta_min() == doctest::Approx(0.2));

  spec.base = spm::BaseDistribution::kBernoulli;
  const long long T = 200000;
  spm::Environment env(spec, T, 2);
  const auto m = spm::compute_metrics(env, 0.5);
  const double mean0 = m.arm_totals[0] / T;
  const double mean1 = m.arm_totals[1] / T;
  CHECK(std::abs(mean0 - 0.3) < 3.0 * std::sqrt(0.21 / T));
  CHECK(std::abs(mean1 - 0.5) < 3.0 * std::sqrt(0.25 / T));
  CHECK(m.best_arm == 0);
}

TEST_CASE("sparse adversarial emits at most S nonzeros in range") {
  for (auto range : {spm::LossRange::kUnit, spm::LossRange::kSigned}) {
    EnvSpec spec;
    spec.kind = EnvKind::kSparseAdversarial;
    spec.K = 10;
    spec.sparsity = 2;
    spec.range = range;
    spm::Environment env(spec, 5000, 3);
    for (long long t = 1; t <= env.T(); ++t) {
      int nnz = 0;
      for (int i = 0; i < 10; ++i) {
        const double v = env.loss(t)[i];
        nnz += v != 0.0;
        REQUIRE(spm::in_range(v, range));
      }
      REQUIRE(nnz <= 2);
    }
    CHECK(spm::compute_metrics(env, 0.5).S_max <= 2);
  }
}

TEST_CASE("scripted losses and masks") {
  const auto losses = temp_file("losses.csv", "# header comment\n0.1,0.9\n1,0\n0.5,0.5\n");
  const auto m = spm::read_csv_matrix(losses);
  REQUIRE(m.size() == 3);
  CHECK(m[0][1] == 0.9);
  const auto mask = spm::read_csv_mask(temp_file("mask.csv", "1,0\n0,1\n1,1\n"));
  CHECK(mask[1] == std::vector<char>{0, 1});
  CHECK_THROWS_AS(spm::read_csv_mask(temp_file("bad.csv", "1,2\n")), spm::ConfigError);
  CHECK_THROWS_AS(spm::read_csv_matrix(temp_file("bad2.csv", "1,x\n")), spm::ConfigError);
  CHECK_THROWS_AS(spm::read_csv_matrix(SPM_TEST_TMPDIR "/missing.csv"), spm::ConfigError);

  EnvSpec spec;
  spec.kind = EnvKind::kAdversarialScripted;
  spec.K = 2;
  spec.loss_matrix = m;
  spm::Environment env(spec, 3, 0);
  CHECK(env.loss(2)[0] == 1.0);
  CHECK_THROWS_AS(spm::Environment(spec, 4, 0), spm::ConfigError);
}

TEST_CASE("sleeping environments always expose an awake arm") {
  auto spec = stochastic({0, 0.1, 0.2, 0.3});
  spec.kind = EnvKind::kSleeping;
  spec.availability = 0.2;
  spm::Environment env(spec, 3000, 4);
  for (long long t = 1; t <= 3000; ++t) {
    const auto* a = env.active(t);
    REQUIRE(a != nullptr);
    int awake = 0;
    for (char v : *a) awake += v;
    REQUIRE(awake >= 1);
  }

  spec.availability_script = {{1, 0, 0, 0}, {0, 1, 1, 0}};
  spm::Environment scripted(spec, 2, 4);
  CHECK(*scripted.active(2) == std::vector<char>{0, 1, 1, 0});
  CHECK_THROWS_AS(spm::Environment(spec, 3, 4), spm::ConfigError);
  spec.availability_script = {{1, 0, 0, 0}, {0, 0, 0, 0}};
  CHECK_THROWS_AS(spm::Environment(spec, 2, 4), spm::ConfigError);
}

TEST_CASE("variation-bounded calibration hits the Q target") {
  EnvSpec spec;
  spec.kind = EnvKind::kVariationBounded;
  spec.K = 4;
  spec.anchor = {0.4, 0.6, 0.6, 0.6};
  for (double q : {10.0, 100.0, 1000.0}) {
    spec.q_target = q;
    spm::Environment env(spec, 8192, 5);
    const auto m = spm::compute_metrics(env, 0.5);
    CHECK(m.Q == doctest::Approx(q).epsilon(1e-3));
    CHECK(m.Q_inf_upper <= m.Q * (1.0 + 1e-9) + 8192 * 1.0003e-3);
  }
  spec.q_target = 1e9;
  CHECK_THROWS_AS(spm::Environment(spec, 1000, 5), spm::ConfigError);
}

TEST_CASE("metrics are recomputed exactly from the loss matrix") {
  auto spec = stochastic({0, 0.1, 0.3});
  spec.base_mean = 0.2;
  spm::Environment env(spec, 500, 6);
  const auto m = spm::compute_metrics(env, 0.5);
  double mean[3] = {0, 0, 0};
  for (long long t = 1; t <= 500; ++t)
    for (int i = 0; i < 3; ++i) mean[i] += env.loss(t)[i] / 500.0;
  double q = 0.0;
  double lstar = 1e300;
  for (int i = 0; i < 3; ++i) {
    double total = 0.0;
    for (long long t = 1; t <= 500; ++t) {
      total += env.loss(t)[i];
      q += (env.loss(t)[i] - mean[i]) * (env.loss(t)[i] - mean[i]);
    }
    lstar = std::min(lstar, total);
  }
  CHECK(m.Q == doctest::Approx(q).epsilon(1e-12));
  CHECK(m.L_star == lstar);
}

TEST_CASE("self-bounding corruption stays within the budget") {
  auto spec = stochastic({0, 0.25, 0.25, 0.25});
  spec.kind = EnvKind::kSelfBounding;
  spec.base_mean = 0.2;
  spec.corruption = 25.0;
  auto clean_spec = spec;
  clean_spec.kind = EnvKind::kStochasticGaps;
  spm::Environment dirty(spec, 2000, 7);
  spm::Environment clean(clean_spec, 2000, 7);
  double spent = 0.0;
  long long changed = 0;
  for (long long t = 1; t <= 2000; ++t) {
    double mx = 0.0;
    for (int i = 0; i < 4; ++i) mx = std::max(mx, std::abs(dirty.loss(t)[i] - clean.loss(t)[i]));
    spent += mx;
    changed += mx > 0.0;
  }
  CHECK(spent <= 25.0);
  CHECK(changed >= 25);
}

TEST_CASE("lower-bound parameters") {
  const auto prm = spm::lower_bound_adv_params(16, 256, 0.5, 1.0);
  CHECK(std::abs(prm.eta - kLowerBoundEta) < 1e-12);
  CHECK(std::abs(prm.epsilon - kLowerBoundEps) < 1e-12);
  CHECK(prm.epsilon * prm.epsilon == doctest::Approx(prm.eta * 16.0 / (8.0 * 256.0)));
  CHECK_THROWS_AS(spm::lower_bound_adv_params(3, 256, 0.5, 1.0), spm::InvalidRegime);
  CHECK_THROWS_AS(spm::lower_bound_adv_params(16, 60, 0.5, 1.0), spm::InvalidRegime);
  CHECK_THROWS_AS(spm::lower_bound_adv_params(16, 256, 0.5, 1.5), spm::InvalidRegime);
  CHECK_THROWS_AS(spm::lower_bound_adv_params(16, 256, 0.5, 0.5), spm::InvalidRegime);
  CHECK(spm::lower_bound_delta_min(16, 0.5, 1.0) == doctest::Approx(0.2));
}

TEST_CASE("soft-sparsity statistic") {
  const std::vector<std::vector<double>> zeros(100, std::vector<double>(5, 0.0));
  CHECK(spm::verify_soft_sparsity(zeros, 0.5, 1.0).mean == 0.0);

  spm::Rng rng(9);
  for (int S = 1; S <= 6; ++S) {
    std::vector<std::vector<double>> samples;
    for (int n = 0; n < 2000; ++n) {
      std::vector<double> v(8, 0.0);
      for (int j = 0; j < S; ++j) v[rng.below(8)] = 2.0 * rng.uniform() - 1.0;
      samples.push_back(v);
    }
    for (const auto& v : samples) {
      const auto r = spm::verify_soft_sparsity({v}, 0.6, 1.0);
      REQUIRE(r.mean <= std::pow(S, 0.6) + 1e-12);
    }
  }

  for (double U : {1.0, 1.7, 2.5}) {
    EnvSpec spec;
    spec.kind = EnvKind::kSoftSparse;
    spec.K = 12;
    spec.alpha = 0.6;
    spec.soft_u = U;
    spm::Environment env(spec, 20000, 10);
    std::vector<std::vector<double>> rows;
    for (long long t = 1; t <= env.T(); ++t) rows.emplace_back(env.loss(t), env.loss(t) + 12);
    const auto r = spm::verify_soft_sparsity(rows, 0.6, U);
    CHECK_FALSE(r.violation);
    CHECK(r.covers_u);
  }
}

TEST_CASE("lower-bound system: where the 1/4 budget holds and where it cannot") {
  // At U = K^a/4 the two equalities already force eta + eps above 1/4.
  const auto edge = spm::lower_bound_adv_params(16, 256, 0.5, 1.0);
  CHECK(edge.eta + edge.epsilon > 0.25);

  // eta <= U/K^a and eps <= sqrt(eta/32) give eta + eps <= 1/4 whenever
  // x + sqrt(x/32) <= 1/4 with x = U/K^a.
  spm::Rng rng(12);
  int checked = 0;
  for (int trial = 0; trial < 20000; ++trial) {
    const int K = 4 + static_cast<int>(rng.below(2000));
    const long long T = 4LL * K + static_cast<long long>(rng.below(1000000));
    const double alpha = 0.05 + 0.9 * rng.uniform();
    const double ka = std::pow(static_cast<double>(K), alpha);
    const double U = 1.0 + rng.uniform() * (ka / 4.0 - 1.0);
    if (ka / 4.0 < 1.0) continue;
    const auto prm = spm::lower_bound_adv_params(K, T, alpha, U);
    CHECK(prm.eta * ka + prm.epsilon == doctest::Approx(U).epsilon(1e-12));
    CHECK(static_cast<double>(T) / K * 8.0 * prm.epsilon * prm.epsilon / prm.eta ==
          doctest::Approx(1.0).epsilon(1e-12));
    CHECK(prm.eta * ka >= U / 2.0);
    const double x = U / ka;
    if (x + std::sqrt(x / 32.0) <= 0.25) {
      CHECK(prm.eta + prm.epsilon <= 0.25);
      ++checked;
    }
  }
  CHECK(checked > 1000);
}
