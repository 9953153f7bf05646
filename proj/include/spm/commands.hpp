#pragma once

// Subcommands behind the spm_cli executable. Each returns a process exit code.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

namespace spm::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitVerification = 3;

// Writes results.csv, summary.json and, under full capture, one
// roundlog-T{T}-rep{r}.csv per cell into `out`.
int run(const nlohmann::json& config, const std::filesystem::path& out, std::ostream& log);

// Repeats `run` with the dotted path `param` set to each value in turn; every
// value gets a subdirectory and sweep.csv collects all rows.
int sweep(const nlohmann::json& base, const std::string& param,
          const std::vector<std::string>& values, const std::filesystem::path& out,
          std::ostream& log);

// Re-runs the configuration echoed in dir/summary.json and compares the
// regenerated results.csv byte for byte.
int replay(const std::filesystem::path& dir, std::ostream& log);

// Prints one JSON report per checked lemma or inequality.
int verify(long long trials, long long rounds, std::uint64_t seed, std::ostream& log);

// Sets e.g. "env.sparsity" to the JSON value in `text`, or to the string
// itself when it does not parse as JSON.
void set_path(nlohmann::json& j, const std::string& dotted, const std::string& text);

}  // namespace spm::cli
