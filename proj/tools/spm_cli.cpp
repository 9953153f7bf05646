// Command-line front end: run, verify, sweep, replay.

#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "spm/commands.hpp"
#include "spm/errors.hpp"

using nlohmann::json;

namespace {

using spm::cli::kExitConfig;
using spm::cli::kExitOk;

struct RunFlags {
  std::string config_path;
  std::string learner;
  std::string env_kind;
  int K = 0;
  std::vector<long long> horizons;
  int replications = 0;
  long long seed = -1;
  double alpha = -1.0;
  int sparsity_hint = 0;
  std::string capture;
  bool record_timing = false;
  std::string out_dir = "out";
  std::vector<double> gaps;
  int sparsity = 0;
  double q_target = -1.0;
  std::vector<double> anchor;
  double soft_u = -1.0;
  double env_alpha = -1.0;
  std::string loss_csv;
  std::string availability_csv;
};

void add_run_flags(CLI::App* app, RunFlags& f) {
  app->add_option("-c,--config", f.config_path, "JSON configuration file");
  app->add_option("--learner", f.learner, "alg1 | alg3 | alg4 | alg5 | alg6 | exp3");
  app->add_option("--env", f.env_kind, "environment kind, e.g. stochastic_gaps");
  app->add_option("-K,--arms", f.K, "number of arms");
  app->add_option("-T,--horizons", f.horizons, "horizon grid")->delimiter(',');
  app->add_option("-R,--replications", f.replications, "replications per horizon");
  app->add_option("-s,--seed", f.seed, "master seed");
  app->add_option("--alpha", f.alpha, "Tsallis exponent (default: chosen from K and S)");
  app->add_option("--known-sparsity", f.sparsity_hint, "S used to choose alpha");
  app->add_option("--capture", f.capture, "summary | full (full writes roundlog-*.csv)");
  app->add_flag("--record-timing", f.record_timing,
                "fill wallclock_ms with measured times (breaks byte-identical output)");
  app->add_option("-o,--out", f.out_dir, "output directory");
  app->add_option("--gaps", f.gaps, "per-arm gaps")->delimiter(',');
  app->add_option("--sparsity", f.sparsity, "S for sparse_adversarial");
  app->add_option("--q-target", f.q_target, "Q target for variation_bounded");
  app->add_option("--anchor", f.anchor, "anchor vector for variation_bounded")->delimiter(',');
  app->add_option("--soft-u", f.soft_u, "U for soft-sparse and lower-bound instances");
  app->add_option("--env-alpha", f.env_alpha, "alpha of soft-sparse and lower-bound instances");
  app->add_option("--loss-csv", f.loss_csv, "scripted loss matrix (T rows, K columns)");
  app->add_option("--availability-csv", f.availability_csv, "scripted 0/1 availability mask");
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw spm::ConfigError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& ex) {
    throw spm::ConfigError(path + ": " + ex.what());
  }
}

// File first, flags on top.
json merged_config(const RunFlags& f) {
  json j = f.config_path.empty() ? json::object() : read_json_file(f.config_path);
  if (!f.learner.empty()) j["learner"]["name"] = f.learner;
  if (f.alpha > 0) j["learner"]["alpha"] = f.alpha;
  if (f.sparsity_hint > 0) j["learner"]["S"] = f.sparsity_hint;
  if (!f.env_kind.empty()) j["env"]["kind"] = f.env_kind;
  if (f.K > 0) j["env"]["K"] = f.K;
  if (!f.gaps.empty()) j["env"]["gaps"] = f.gaps;
  if (f.sparsity > 0) j["env"]["sparsity"] = f.sparsity;
  if (f.q_target >= 0) j["env"]["q_target"] = f.q_target;
  if (!f.anchor.empty()) j["env"]["anchor"] = f.anchor;
  if (f.soft_u > 0) j["env"]["U"] = f.soft_u;
  if (f.env_alpha > 0) j["env"]["alpha"] = f.env_alpha;
  if (!f.loss_csv.empty()) j["env"]["loss_csv"] = f.loss_csv;
  if (!f.availability_csv.empty()) j["env"]["availability_csv"] = f.availability_csv;
  if (!f.horizons.empty()) j["horizons"] = f.horizons;
  if (f.replications > 0) j["replications"] = f.replications;
  if (f.seed >= 0) j["seed"] = static_cast<std::uint64_t>(f.seed);
  if (!f.capture.empty()) j["capture"] = f.capture;
  if (f.record_timing) j["record_timing"] = true;
  return j;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stability-penalty-matching bandit simulator"};
  app.require_subcommand(1);

  RunFlags run_flags;
  auto* run = app.add_subcommand("run", "run an experiment and write results.csv/summary.json");
  add_run_flags(run, run_flags);

  RunFlags sweep_flags;
  std::string sweep_param;
  std::vector<std::string> sweep_values;
  auto* sweep = app.add_subcommand("sweep", "repeat an experiment over one configuration field");
  add_run_flags(sweep, sweep_flags);
  sweep->add_option("--param", sweep_param, "dotted config path, e.g. env.sparsity")->required();
  sweep->add_option("--values", sweep_values, "values for the field")->delimiter(',')->required();

  long long verify_trials = 100000;
  long long verify_rounds = 10000;
  long long verify_seed = 1;
  auto* verify = app.add_subcommand("verify", "run the lemma and inequality checks");
  verify->add_option("--trials", verify_trials, "samples per closed-form inequality");
  verify->add_option("--rounds", verify_rounds, "rounds per trajectory check");
  verify->add_option("--seed", verify_seed, "seed");

  std::string replay_dir;
  auto* replay = app.add_subcommand("replay", "re-run a finished run and compare results.csv");
  replay->add_option("dir", replay_dir, "directory holding summary.json and results.csv")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*run) return spm::cli::run(merged_config(run_flags), run_flags.out_dir, std::cout);
    if (*sweep)
      return spm::cli::sweep(merged_config(sweep_flags), sweep_param, sweep_values,
                             sweep_flags.out_dir, std::cout);
    if (*verify)
      return spm::cli::verify(verify_trials, verify_rounds,
                              static_cast<std::uint64_t>(verify_seed), std::cout);
    if (*replay) return spm::cli::replay(replay_dir, std::cout);
  } catch (const spm::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const spm::IncompatibleLossRange& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const spm::InvalidRegime& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kExitOk;
}
