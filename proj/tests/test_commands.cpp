#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "spm/commands.hpp"
#include "spm/errors.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json small_run() {
  return {{"learner", {{"name", "alg1"}}},
          {"env", {{"kind", "stochastic_gaps"}, {"K", 3}, {"gaps", {0, 0.2, 0.3}}}},
          {"horizons", {50, 80}},
          {"replications", 2},
          {"seed", 9},
          {"capture", "full"}};
}

}  // namespace

TEST_CASE("set_path creates nested keys and parses JSON values") {
  json j = {{"env", {{"K", 4}}}};
  spm::cli::set_path(j, "env.sparsity", "3");
  spm::cli::set_path(j, "env.gaps", "[0, 0.5]");
  spm::cli::set_path(j, "learner.name", "alg5");
  spm::cli::set_path(j, "a.b.c", "true");
  CHECK(j["env"]["K"] == 4);
  CHECK(j["env"]["sparsity"] == 3);
  CHECK(j["env"]["gaps"] == json::array({0, 0.5}));
  CHECK(j["learner"]["name"] == "alg5");
  CHECK(j["a"]["b"]["c"] == true);
  CHECK_THROWS_AS(spm::cli::set_path(j, "env..K", "1"), spm::ConfigError);
  CHECK_THROWS_AS(spm::cli::set_path(j, "", "1"), spm::ConfigError);
}

TEST_CASE("run writes artifacts that replay reproduces") {
  const fs::path dir = fs::path(SPM_TEST_TMPDIR) / "cmd_run";
  fs::remove_all(dir);
  std::ostringstream log;
  REQUIRE(spm::cli::run(small_run(), dir, log) == spm::cli::kExitOk);
  CHECK(fs::exists(dir / "results.csv"));
  CHECK(fs::exists(dir / "summary.json"));
  CHECK(fs::exists(dir / "roundlog-T80-rep1.csv"));
  CHECK(spm::cli::replay(dir, log) == spm::cli::kExitOk);

  std::ofstream(dir / "results.csv", std::ios::app) << "tampered\n";
  CHECK(spm::cli::replay(dir, log) == spm::cli::kExitVerification);
}

TEST_CASE("sweep writes one directory per value and a combined table") {
  const fs::path dir = fs::path(SPM_TEST_TMPDIR) / "cmd_sweep";
  fs::remove_all(dir);
  json base = small_run();
  base["capture"] = "summary";
  std::ostringstream log;
  REQUIRE(spm::cli::sweep(base, "seed", {"1", "2"}, dir, log) == spm::cli::kExitOk);
  CHECK(fs::exists(dir / "seed=1" / "results.csv"));
  CHECK(fs::exists(dir / "seed=2" / "summary.json"));
  std::ifstream in(dir / "sweep.csv");
  int lines = 0;
  for (std::string line; std::getline(in, line);) ++lines;
  CHECK(lines == 1 + 2 * 2 * 2);
}
