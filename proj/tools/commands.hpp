#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace dmshm::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitDivergence = 4;

/// Flag overrides for `run`; each one beats the config file.
struct RunOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> method;
  std::optional<std::filesystem::path> output_dir;
  std::optional<std::size_t> jobs;
};

/// Runs every (method, seed) pair of the config and writes
///   <out>/<method>/seed_<seed>/{config.json, metrics.json, periods.csv[, projection.csv]}
///   <out>/summary.csv
/// Returns one of the kExit* codes; diagnostics go to `err`.
int cmd_run(const std::filesystem::path& config_path, const RunOverrides& overrides,
            std::ostream& out, std::ostream& err);

/// Writes the named synthetic stream as CSV.
int cmd_simulate(const std::string& preset, std::uint64_t seed, const std::filesystem::path& out_path,
                 std::ostream& out, std::ostream& err);

/// Turns a raw series CSV into lag-window samples (features x0.., target y
/// or y0..) that `run` can load with a csv source.
int cmd_window(const std::filesystem::path& in_path, const std::vector<std::string>& columns,
               std::size_t window, std::size_t horizon, std::size_t target_channel,
               const std::filesystem::path& out_path, std::ostream& out, std::ostream& err);

/// Full command line dispatch (used by main).
int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace dmshm::cli
