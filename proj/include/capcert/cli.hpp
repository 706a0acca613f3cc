#ifndef CAPCERT_CLI_HPP
#define CAPCERT_CLI_HPP

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace capcert::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitBadConfig = 1;   // malformed config file
inline constexpr int kExitInfeasible = 2;  // valid config, infeasible parameters

struct CommonOptions {
  std::string config_path;
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;   // overrides monte_carlo.seed
  std::optional<int> threads;          // overrides CAPCERT_THREADS
};

// Deterministic bound evaluation over the configured sweep grid; writes the
// CSV/JSON artifact named by the config.
int run_experiment(const CommonOptions& opts, std::ostream& err);

// Stochastic campaign (protocol simulation / estimator coverage / polytope
// coverage); writes per-trial records and an aggregate summary.
int run_montecarlo(const CommonOptions& opts, std::ostream& err);

std::vector<std::string> preset_names();

// Writes the named preset config to out_path, or to `out` when no path is
// given.
int write_preset(const std::string& name,
                 const std::optional<std::string>& out_path, std::ostream& out,
                 std::ostream& err);

// --threads option, then CAPCERT_THREADS, then 1.
int resolve_threads(const std::optional<int>& cli_threads);

}  // namespace capcert::cli

#endif
