#include "spm/commands.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>
#include <ostream>
#include <sstream>

#include "spm/environments.hpp"
#include "spm/harness.hpp"
#include "spm/learners.hpp"
#include "spm/oracles.hpp"

namespace spm::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json read_json(const fs::path& path) {
  try {
    return json::parse(read_text(path));
  } catch (const json::exception& ex) {
    throw ConfigError(path.string() + ": " + ex.what());
  }
}

struct Artifacts {
  std::string results;
  json summary;
};

RoundLogFactory roundlog_writer(const fs::path& dir) {
  return [dir](long long T, int rep, const ReplicationRunner& runner) {
    const auto& env = runner.environment();
    std::vector<double> totals(static_cast<std::size_t>(env.K()), 0.0);
    for (long long t = 1; t <= env.T(); ++t)
      for (int i = 0; i < env.K(); ++i) totals[static_cast<std::size_t>(i)] += env.loss(t)[i];
    const int best =
        static_cast<int>(std::min_element(totals.begin(), totals.end()) - totals.begin());
    auto file = std::make_shared<std::ofstream>(
        dir / ("roundlog-T" + std::to_string(T) + "-rep" + std::to_string(rep) + ".csv"),
        std::ios::binary);
    *file << roundlog_header(env.K());
    return RoundSink([file, best](const RoundRecord& r, const double* loss) {
      *file << roundlog_line(r, loss, best);
    });
  };
}

Artifacts execute(const ExperimentConfig& cfg, const fs::path& dir) {
  fs::create_directories(dir);
  const auto rows =
      run_experiment(cfg, cfg.capture == Capture::kFull ? roundlog_writer(dir) : nullptr);
  Artifacts art{results_csv(rows), summary_json(cfg, rows)};
  write_text(dir / "results.csv", art.results);
  write_text(dir / "summary.json", art.summary.dump(2) + "\n");
  return art;
}

Trajectory capture(LearnerId id, const EnvSpec& env, long long T, std::uint64_t seed) {
  ExperimentConfig cfg;
  cfg.learner.name = to_string(id);
  cfg.learner.alpha = choose_alpha(env.K);
  cfg.env = env;
  cfg.horizons = {T};
  cfg.seed = seed;
  ReplicationRunner runner(cfg, T, 0);
  Trajectory tr;
  tr.learner = id;
  tr.config = runner.spm_config();
  runner.run_until(T, [&](const RoundRecord& r, const double* loss) {
    tr.rounds.push_back(r);
    tr.losses.emplace_back(loss, loss + env.K);
  });
  return tr;
}

}  // namespace

void set_path(json& j, const std::string& dotted, const std::string& text) {
  std::vector<std::string> keys;
  std::stringstream ss(dotted);
  for (std::string key; std::getline(ss, key, '.');) {
    if (key.empty()) throw ConfigError("malformed parameter path '" + dotted + "'");
    keys.push_back(key);
  }
  if (!dotted.empty() && dotted.back() == '.')
    throw ConfigError("malformed parameter path '" + dotted + "'");
  if (keys.empty()) throw ConfigError("empty parameter path");
  json* node = &j;
  for (std::size_t i = 0; i + 1 < keys.size(); ++i) node = &(*node)[keys[i]];
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  (*node)[keys.back()] = value;
}

int run(const json& config, const fs::path& out, std::ostream& log) {
  const auto cfg = config_from_json(config);
  const auto art = execute(cfg, out);
  for (const auto& h : art.summary["horizons"])
    log << "T=" << h["T"] << "  expected_regret=" << h["expected_regret_mean"].get<double>()
        << "  realized_regret=" << h["realized_regret_mean"].get<double>() << "\n";
  log << "wrote " << (out / "results.csv").string() << "\n";
  return kExitOk;
}

int sweep(const json& base, const std::string& param, const std::vector<std::string>& values,
          const fs::path& out, std::ostream& log) {
  std::string table;
  for (const auto& v : values) {
    json j = base;
    set_path(j, param, v);
    const auto art = execute(config_from_json(j), out / (param + "=" + v));
    std::stringstream rows(art.results);
    std::string line;
    std::getline(rows, line);
    if (table.empty()) table = "value," + line + "\n";
    while (std::getline(rows, line)) table += v + "," + line + "\n";
    for (const auto& h : art.summary["horizons"])
      log << param << "=" << v << "  T=" << h["T"]
          << "  expected_regret=" << h["expected_regret_mean"].get<double>() << "\n";
  }
  write_text(out / "sweep.csv", table);
  return kExitOk;
}

int replay(const fs::path& dir, std::ostream& log) {
  const json summary = read_json(dir / "summary.json");
  if (!summary.contains("config")) throw ConfigError("summary.json has no config section");
  const auto cfg = config_from_json(summary["config"]);
  if (cfg.record_timing)
    throw ConfigError("runs with recorded timings are not byte-reproducible");
  const std::string expected = read_text(dir / "results.csv");
  const std::string actual = results_csv(run_experiment(cfg));
  if (actual == expected) {
    log << "replay matches " << (dir / "results.csv").string() << "\n";
    return kExitOk;
  }
  log << "replay differs from " << (dir / "results.csv").string() << "\n";
  return kExitVerification;
}

int verify(long long trials, long long rounds, std::uint64_t seed, std::ostream& log) {
  std::vector<LemmaReport> reports;
  Rng rng(derive_seed(seed, 0, 0, StreamPurpose::kOracle));

  LemmaReport lemma1{"lemma1_real_time_spm"};
  for (int s = 0; s < 1000; ++s) {
    std::vector<double> z(500);
    std::vector<double> h(500);
    for (auto& v : z) v = 5.0 * rng.uniform();
    for (auto& v : h) v = 0.1 + 1.9 * rng.uniform();
    const auto r = check_lemma1(z, h, 1.0 + 10.0 * rng.uniform());
    lemma1.record(r.worst_slack, r.violations ? std::abs(r.worst_slack) / 2 : INFINITY,
                  r.witness);
    if (r.violations) ++lemma1.violations;
  }
  reports.push_back(lemma1);
  for (auto& r : check_technical_inequalities(trials, rng)) reports.push_back(r);

  EnvSpec stochastic;
  stochastic.K = 8;
  stochastic.gaps = {0, 0.25, 0.25, 0.25, 0.25, 0.25, 0.25, 0.25};
  EnvSpec sparse;
  sparse.kind = EnvKind::kSparseAdversarial;
  sparse.K = 8;
  sparse.sparsity = 2;
  sparse.range = LossRange::kSigned;
  EnvSpec lower;
  lower.kind = EnvKind::kLowerBoundStochastic;
  lower.K = 8;
  lower.alpha = 0.5;
  lower.soft_u = 1.0;
  for (const auto& env : {stochastic, sparse, lower})
    for (auto& r : check_trajectory_lemmas(capture(LearnerId::kAlg1, env, rounds, seed))) {
      r.id += " [" + std::string(to_string(env.kind)) + "]";
      reports.push_back(r);
    }
  for (auto& r : check_trajectory_lemmas(capture(LearnerId::kAlg3, stochastic, rounds, seed)))
    reports.push_back(r);
  EnvSpec sleeping = stochastic;
  sleeping.kind = EnvKind::kSleeping;
  for (auto& r : check_trajectory_lemmas(capture(LearnerId::kAlg4, sleeping, rounds, seed)))
    reports.push_back(r);

  bool ok = true;
  for (const auto& r : reports) {
    log << r.to_json().dump() << "\n";
    ok = ok && r.passed();
  }
  return ok ? kExitOk : kExitVerification;
}

}  // namespace spm::cli
