#pragma once

// Experiment driver: configuration, replication runner, regret accounting
// and the results.csv / summary.json writers used by the CLI.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <limits>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "spm/environments.hpp"
#include "spm/errors.hpp"
#include "spm/learners.hpp"
#include "spm/rng.hpp"
#include "spm/spm.hpp"

namespace spm {

using nlohmann::json;

enum class Capture { kSummary, kFull };

struct LearnerSettings {
  std::string name = "alg1";  // alg1 | alg3 | alg4 | alg5 | alg6 | exp3
  std::optional<double> alpha;
  std::optional<int> sparsity_hint;  // known S for the alpha choice
  std::optional<double> beta1;
  std::optional<double> gamma;
  double d = 2.0;

  LearnerId id() const { return learner_from_string(name); }
  ConstantSet constants() const {
    return name == "alg6" ? ConstantSet::kAlternate : ConstantSet::kDefault;
  }
};

struct ExperimentConfig {
  LearnerSettings learner;
  EnvSpec env;
  std::string loss_csv;          // source of env.loss_matrix, echoed verbatim
  std::string availability_csv;  // source of env.availability_script
  std::vector<long long> horizons;
  int replications = 1;
  std::uint64_t seed = 0;
  Capture capture = Capture::kSummary;
  bool record_timing = false;
};

inline SpmConfig resolve_spm(const LearnerSettings& s, int K, long long T) {
  const double alpha = s.alpha ? *s.alpha : choose_alpha(K, s.sparsity_hint);
  SpmConfig cfg = SpmConfig::make(K, T, alpha, s.constants(), s.d);
  if (s.beta1) cfg.beta1 = *s.beta1;
  if (s.gamma) cfg.gamma = *s.gamma;
  cfg.validate();
  return cfg;
}

inline void check_compatibility(const ExperimentConfig& cfg) {
  const LearnerId id = cfg.learner.id();
  const bool sleeping = cfg.env.kind == EnvKind::kSleeping;
  if (id == LearnerId::kAlg4 && !sleeping)
    throw ConfigError("alg4 runs on sleeping environments");
  if (id != LearnerId::kAlg4 && sleeping)
    throw ConfigError("sleeping environments need the sleeping learner alg4");
  if ((id == LearnerId::kAlg3 || id == LearnerId::kAlg5) && cfg.env.uses_negative_losses())
    throw IncompatibleLossRange(std::string(to_string(cfg.env.kind)) + " emits losses in " +
                                "[-1,1] but " + cfg.learner.name + " accepts [0,1]");
}

inline void validate(const ExperimentConfig& cfg) {
  if (cfg.horizons.empty()) throw ConfigError("horizon grid is empty");
  if (cfg.replications < 1) throw ConfigError("replications must be at least 1");
  cfg.learner.id();
  for (long long T : cfg.horizons) {
    resolve_spm(cfg.learner, cfg.env.K, T);
    validate(cfg.env, T);
  }
  check_compatibility(cfg);
}

// ---------------------------------------------------------------------------
// JSON (de)serialization of configurations

inline json to_json(const ExperimentConfig& c) {
  json l = {{"name", c.learner.name}, {"d", c.learner.d}};
  if (c.learner.alpha) l["alpha"] = *c.learner.alpha;
  if (c.learner.sparsity_hint) l["S"] = *c.learner.sparsity_hint;
  if (c.learner.beta1) l["beta1"] = *c.learner.beta1;
  if (c.learner.gamma) l["gamma"] = *c.learner.gamma;
  const auto& e = c.env;
  json env = {{"kind", to_string(e.kind)},
              {"K", e.K},
              {"range", e.range == LossRange::kSigned ? "signed" : "unit"},
              {"gaps", e.gaps},
              {"base_mean", e.base_mean},
              {"base", e.base == BaseDistribution::kBernoulli ? "bernoulli" : "deterministic"},
              {"corruption", e.corruption},
              {"sparsity", e.sparsity},
              {"sparse_gap", e.sparse_gap},
              {"alpha", e.alpha},
              {"U", e.soft_u},
              {"q_target", e.q_target},
              {"anchor", e.anchor},
              {"availability", e.availability},
              {"best_arm", e.best_arm}};
  if (!c.loss_csv.empty()) env["loss_csv"] = c.loss_csv;
  if (!c.availability_csv.empty()) env["availability_csv"] = c.availability_csv;
  return {{"learner", l},
          {"env", env},
          {"horizons", c.horizons},
          {"replications", c.replications},
          {"seed", c.seed},
          {"capture", c.capture == Capture::kFull ? "full" : "summary"},
          {"record_timing", c.record_timing}};
}

inline ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c;
  try {
    if (j.contains("learner")) {
      const auto& l = j.at("learner");
      c.learner.name = l.value("name", c.learner.name);
      c.learner.d = l.value("d", c.learner.d);
      if (l.contains("alpha") && !l["alpha"].is_null()) c.learner.alpha = l["alpha"].get<double>();
      if (l.contains("S") && !l["S"].is_null()) c.learner.sparsity_hint = l["S"].get<int>();
      if (l.contains("beta1") && !l["beta1"].is_null()) c.learner.beta1 = l["beta1"].get<double>();
      if (l.contains("gamma") && !l["gamma"].is_null()) c.learner.gamma = l["gamma"].get<double>();
    }
    if (j.contains("env")) {
      const auto& e = j.at("env");
      auto& s = c.env;
      s.kind = env_kind_from_string(e.value("kind", std::string("stochastic_gaps")));
      s.K = e.value("K", 0);
      const std::string range = e.value("range", std::string("unit"));
      if (range != "unit" && range != "signed") throw ConfigError("range must be unit or signed");
      s.range = range == "signed" ? LossRange::kSigned : LossRange::kUnit;
      s.gaps = e.value("gaps", std::vector<double>{});
      s.base_mean = e.value("base_mean", s.base_mean);
      const std::string base = e.value("base", std::string("bernoulli"));
      if (base != "bernoulli" && base != "deterministic")
        throw ConfigError("base must be bernoulli or deterministic");
      s.base = base == "bernoulli" ? BaseDistribution::kBernoulli
                                   : BaseDistribution::kDeterministic;
      s.corruption = e.value("corruption", s.corruption);
      s.sparsity = e.value("sparsity", s.sparsity);
      s.sparse_gap = e.value("sparse_gap", s.sparse_gap);
      s.alpha = e.value("alpha", s.alpha);
      s.soft_u = e.value("U", s.soft_u);
      s.q_target = e.value("q_target", s.q_target);
      s.anchor = e.value("anchor", std::vector<double>{});
      s.availability = e.value("availability", s.availability);
      s.best_arm = e.value("best_arm", s.best_arm);
      c.loss_csv = e.value("loss_csv", std::string());
      c.availability_csv = e.value("availability_csv", std::string());
      if (!c.loss_csv.empty()) s.loss_matrix = read_csv_matrix(c.loss_csv);
      if (!c.availability_csv.empty()) s.availability_script = read_csv_mask(c.availability_csv);
      if (s.K == 0 && !s.loss_matrix.empty()) s.K = static_cast<int>(s.loss_matrix[0].size());
    }
    c.horizons = j.value("horizons", std::vector<long long>{});
    c.replications = j.value("replications", 1);
    c.seed = j.value("seed", std::uint64_t{0});
    const std::string cap = j.value("capture", std::string("summary"));
    if (cap != "summary" && cap != "full") throw ConfigError("capture must be summary or full");
    c.capture = cap == "full" ? Capture::kFull : Capture::kSummary;
    c.record_timing = j.value("record_timing", false);
  } catch (const json::exception& ex) {
    throw ConfigError(std::string("malformed configuration: ") + ex.what());
  }
  return c;
}

// ---------------------------------------------------------------------------
// Regret accounting

// Accumulates, for every fixed arm a, the realized sum of l_{I_t} - l_a and
// the expected-instantaneous sum of <p_t, l_t> - l_a. With an active set the
// sums run over rounds where a is awake (per-action regret).
class RegretAccumulator {
 public:
  explicit RegretAccumulator(int K)
      : realized_(static_cast<std::size_t>(K), 0.0),
        expected_(static_cast<std::size_t>(K), 0.0) {}

  void add(const ProbVector& p, int arm, const double* loss, const std::vector<char>* active) {
    const std::size_t K = realized_.size();
    double mean = 0.0;
    for (std::size_t i = 0; i < K; ++i) mean += p[i] * loss[i];
    const double played = loss[static_cast<std::size_t>(arm)];
    for (std::size_t a = 0; a < K; ++a) {
      if (active && !(*active)[a]) continue;
      realized_[a] += played - loss[a];
      expected_[a] += mean - loss[a];
    }
  }

  const std::vector<double>& realized() const { return realized_; }
  const std::vector<double>& expected() const { return expected_; }

  int best_arm() const {
    return static_cast<int>(std::max_element(expected_.begin(), expected_.end()) -
                            expected_.begin());
  }
  double realized_regret() const { return *std::max_element(realized_.begin(), realized_.end()); }
  double expected_regret() const { return *std::max_element(expected_.begin(), expected_.end()); }

  json to_json() const { return {{"realized", realized_}, {"expected", expected_}}; }
  void from_json(const json& j) {
    realized_ = j.at("realized").get<std::vector<double>>();
    expected_ = j.at("expected").get<std::vector<double>>();
  }

 private:
  std::vector<double> realized_;
  std::vector<double> expected_;
};

// Regret of a recorded round stream against an environment's loss matrix.
inline RegretAccumulator compute_regret(const std::vector<RoundRecord>& rounds,
                                        const Environment& env) {
  RegretAccumulator acc(env.K());
  for (const auto& r : rounds) acc.add(r.p, r.arm, env.loss(r.t), env.active(r.t));
  return acc;
}

struct ReplicationResult {
  long long T = 0;
  int replication = 0;
  std::string learner;
  std::string env;
  double realized_regret = 0.0;
  double expected_regret = 0.0;
  int best_arm = 0;
  int S_realized = 0;
  double Q_realized = 0.0;
  double L_star = 0.0;
  double wallclock_ms = 0.0;
  std::vector<double> per_arm_expected;
  std::vector<double> per_arm_realized;
  EnvMetrics metrics;
};

using RoundSink = std::function<void(const RoundRecord&, const double* loss)>;

// Runs one (T, replication) cell. Learner and environment draw from
// independent streams derived from the master seed.
class ReplicationRunner {
 public:
  ReplicationRunner(const ExperimentConfig& cfg, long long T, int replication)
      : cfg_(cfg),
        T_(T),
        replication_(replication),
        spm_(resolve_spm(cfg.learner, cfg.env.K, T)),
        env_(cfg.env, T, derive_seed(cfg.seed, static_cast<std::uint64_t>(T),
                                     static_cast<std::uint64_t>(replication),
                                     StreamPurpose::kEnvironment)),
        learner_(make_learner(cfg.learner.id(), spm_,
                              derive_seed(cfg.seed, static_cast<std::uint64_t>(T),
                                          static_cast<std::uint64_t>(replication),
                                          StreamPurpose::kLearner))),
        acc_(cfg.env.K) {
    check_compatibility(cfg_);
  }

  long long round() const { return t_; }
  bool done() const { return t_ >= T_; }
  const Environment& environment() const { return env_; }
  const Learner& learner() const { return *learner_; }
  const SpmConfig& spm_config() const { return spm_; }

  void step(const RoundSink& sink = nullptr) {
    const long long t = ++t_;
    const auto* active = env_.active(t);
    const int arm = learner_->select(active);
    const double* loss = env_.loss(t);
    learner_->observe(arm, loss[static_cast<std::size_t>(arm)]);
    const auto& rec = learner_->record();
    acc_.add(rec.p, arm, loss, active);
    if (sink) sink(rec, loss);
  }

  void run_until(long long t, const RoundSink& sink = nullptr) {
    while (t_ < std::min(t, T_)) step(sink);
  }

  json checkpoint() const {
    return {{"format", "spm-replication-checkpoint"},
            {"version", kCheckpointVersion},
            {"T", T_},
            {"replication", replication_},
            {"round", t_},
            {"learner", learner_->checkpoint()},
            {"regret", acc_.to_json()}};
  }

  void restore(const json& j) {
    if (j.value("format", "") != "spm-replication-checkpoint")
      throw ConfigError("not a replication checkpoint");
    if (j.at("T").get<long long>() != T_ || j.at("replication").get<int>() != replication_)
      throw ConfigError("checkpoint belongs to a different cell");
    t_ = j.at("round").get<long long>();
    learner_->restore(j.at("learner"));
    acc_.from_json(j.at("regret"));
  }

  ReplicationResult finish(double wallclock_ms = 0.0) {
    run_until(T_);
    ReplicationResult r;
    r.T = T_;
    r.replication = replication_;
    r.learner = cfg_.learner.name;
    r.env = to_string(cfg_.env.kind);
    r.realized_regret = acc_.realized_regret();
    r.expected_regret = acc_.expected_regret();
    r.best_arm = acc_.best_arm();
    r.metrics = compute_metrics(env_, spm_.alpha);
    r.S_realized = r.metrics.S_max;
    r.Q_realized = r.metrics.Q;
    r.L_star = r.metrics.L_star;
    r.wallclock_ms = wallclock_ms;
    r.per_arm_expected = acc_.expected();
    r.per_arm_realized = acc_.realized();
    return r;
  }

 private:
  ExperimentConfig cfg_;
  long long T_;
  int replication_;
  SpmConfig spm_;
  Environment env_;
  std::unique_ptr<Learner> learner_;
  RegretAccumulator acc_;
  long long t_ = 0;
};

// ---------------------------------------------------------------------------
// Output formats

inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string roundlog_header(int K) {
  std::string h = "t,arm,loss,beta,z,h,inst_regret";
  for (int i = 0; i < K; ++i) h += ",p" + std::to_string(i);
  return h + "\n";
}

inline std::string roundlog_line(const RoundRecord& r, const double* loss, int best_arm) {
  double mean = 0.0;
  for (std::size_t i = 0; i < r.p.size(); ++i) mean += r.p[i] * loss[i];
  const auto sum = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  };
  // Coordinate-wise learners log the chosen arm's rate, stability and penalty.
  const auto pick = [&](const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    return v.size() == 1 ? v[0] : v[static_cast<std::size_t>(r.arm)];
  };
  std::string line = std::to_string(r.t) + "," + std::to_string(r.arm) + "," +
                     format_double(r.loss) + "," + format_double(pick(r.beta)) + "," +
                     format_double(r.z.size() > 1 ? sum(r.z) : pick(r.z)) + "," +
                     format_double(pick(r.h)) + "," +
                     format_double(mean - loss[static_cast<std::size_t>(best_arm)]);
  for (double v : r.p) line += "," + format_double(v);
  return line + "\n";
}

inline std::string results_csv(const std::vector<ReplicationResult>& rows) {
  std::string out =
      "T,replication,learner,env,realized_regret,expected_regret,best_arm,S_realized,"
      "Q_realized,Lstar,wallclock_ms\n";
  for (const auto& r : rows) {
    out += std::to_string(r.T) + "," + std::to_string(r.replication) + "," + r.learner + "," +
           r.env + "," + format_double(r.realized_regret) + "," +
           format_double(r.expected_regret) + "," + std::to_string(r.best_arm) + "," +
           std::to_string(r.S_realized) + "," + format_double(r.Q_realized) + "," +
           format_double(r.L_star) + "," + format_double(r.wallclock_ms) + "\n";
  }
  return out;
}

struct Aggregate {
  double mean = 0.0;
  double se = std::numeric_limits<double>::quiet_NaN();
};

inline Aggregate aggregate(const std::vector<double>& v) {
  Aggregate a;
  if (v.empty()) return a;
  double s = 0.0;
  for (double x : v) s += x;
  a.mean = s / static_cast<double>(v.size());
  if (v.size() >= 2) {
    double ss = 0.0;
    for (double x : v) ss += (x - a.mean) * (x - a.mean);
    a.se = std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
  }
  return a;
}

inline json nan_safe(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline json summary_json(const ExperimentConfig& cfg, const std::vector<ReplicationResult>& rows) {
  json per_t = json::array();
  for (long long T : cfg.horizons) {
    std::vector<double> realized, expected, S, Q, Ls;
    std::vector<double> per_arm(static_cast<std::size_t>(cfg.env.K), 0.0);
    int count = 0;
    for (const auto& r : rows) {
      if (r.T != T) continue;
      realized.push_back(r.realized_regret);
      expected.push_back(r.expected_regret);
      S.push_back(r.S_realized);
      Q.push_back(r.Q_realized);
      Ls.push_back(r.L_star);
      for (std::size_t i = 0; i < per_arm.size(); ++i) per_arm[i] += r.per_arm_expected[i];
      ++count;
    }
    if (count == 0) continue;
    for (auto& v : per_arm) v /= count;
    const auto re = aggregate(realized);
    const auto ex = aggregate(expected);
    const double s_mean = aggregate(S).mean;
    const double q_mean = aggregate(Q).mean;
    const double lnK = std::log(static_cast<double>(cfg.env.K));
    const double lnT = std::log(static_cast<double>(T));
    json entry = {{"T", T},
                  {"replications", count},
                  {"realized_regret_mean", re.mean},
                  {"realized_regret_se", nan_safe(re.se)},
                  {"expected_regret_mean", ex.mean},
                  {"expected_regret_se", nan_safe(ex.se)},
                  {"S_realized_mean", s_mean},
                  {"Q_realized_mean", q_mean},
                  {"Lstar_mean", aggregate(Ls).mean},
                  {"per_arm_expected_regret_mean", per_arm}};
    json ratios = {{"regret_over_ln_T", ex.mean / lnT}};
    ratios["regret_over_sqrt_S_T_lnK"] =
        s_mean > 0 ? json(ex.mean / std::sqrt(s_mean * T * lnK)) : json(nullptr);
    ratios["regret_over_sqrt_Q_lnK"] =
        q_mean > 0 ? json(ex.mean / std::sqrt(q_mean * lnK)) : json(nullptr);
    entry["normalized"] = ratios;
    per_t.push_back(entry);
  }
  return {{"config", to_json(cfg)}, {"horizons", per_t}};
}

// ---------------------------------------------------------------------------
// Parallel experiment execution

inline unsigned worker_count(std::size_t jobs) {
  unsigned n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("SPM_THREADS")) {
    const long cap = std::strtol(env, nullptr, 10);
    if (cap >= 1) n = std::min<unsigned>(n, static_cast<unsigned>(cap));
  }
  return std::max(1u, std::min<unsigned>(n, static_cast<unsigned>(std::max<std::size_t>(jobs, 1))));
}

using RoundLogFactory =
    std::function<RoundSink(long long T, int replication, const ReplicationRunner& runner)>;

inline std::vector<ReplicationResult> run_experiment(const ExperimentConfig& cfg,
                                                     const RoundLogFactory& logs = nullptr) {
  validate(cfg);
  struct Job {
    long long T;
    int rep;
  };
  std::vector<Job> jobs;
  for (long long T : cfg.horizons)
    for (int r = 0; r < cfg.replications; ++r) jobs.push_back({T, r});
  std::vector<ReplicationResult> results(jobs.size());
  std::atomic<std::size_t> next{0};
  std::mutex err_mu;
  std::exception_ptr error;

  auto worker = [&]() {
    for (;;) {
      const std::size_t j = next.fetch_add(1);
      if (j >= jobs.size()) return;
      try {
        const auto start = std::chrono::steady_clock::now();
        ReplicationRunner runner(cfg, jobs[j].T, jobs[j].rep);
        RoundSink sink = logs ? logs(jobs[j].T, jobs[j].rep, runner) : nullptr;
        runner.run_until(jobs[j].T, sink);
        double ms = 0.0;
        if (cfg.record_timing)
          ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
                   .count();
        results[j] = runner.finish(ms);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mu);
        if (!error) error = std::current_exception();
        next.store(jobs.size());
        return;
      }
    }
  };

  const unsigned n = worker_count(jobs.size());
  if (n == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned i = 0; i < n; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (error) std::rethrow_exception(error);
  std::sort(results.begin(), results.end(), [](const auto& a, const auto& b) {
    return a.T != b.T ? a.T < b.T : a.replication < b.replication;
  });
  return results;
}

}  // namespace spm
