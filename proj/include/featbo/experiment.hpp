#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "featbo/bo.hpp"

namespace featbo {

/// Malformed or out-of-range experiment configuration; the diagnostic names
/// the offending key.
class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

struct ExperimentConfig {
  std::string benchmark = "rosenbrock-linear";
  std::string profile = "full";  // "full" or "ci"
  std::vector<std::uint64_t> seeds;
  std::string output_dir = "featbo-out";
  int parallelism = 0;      // 0: hardware concurrency, capped by FEATBO_THREADS
  bool csv_wall_ms = false; // measured timings in the CSV break rerun byte-identity
  BOConfig bo;
};

/// Built-in defaults for a profile ("full": the 20-seed, 300-iteration
/// protocol; "ci": a minutes-scale shrink on the small benchmark).
ExperimentConfig default_config(const std::string& profile);

/// Strict JSON config: unknown keys are rejected, missing keys take the
/// profile defaults, out-of-range values name the key.
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig parse_config_file(const std::string& path);

/// Inverse of parse_config up to default filling: parse(serialize(c))
/// resolves to an equal config.
std::string serialize_config(const ExperimentConfig& cfg);

struct SeedResult {
  std::uint64_t seed = 0;
  double final_best_f_true = 0.0;
  double final_log_regret = 0.0;
  double wall_ms = 0.0;
};

struct RunSummary {
  std::vector<double> mean_log_regret;    // per BO iteration, length T_end
  std::vector<double> stderr_log_regret;  // sample standard error (n-1)
  std::vector<SeedResult> per_seed;
  double total_wall_ms = 0.0;
};

/// Runs the configured benchmark once per seed (seeds on a bounded worker
/// pool), writes one CSV per seed plus summary.json into output_dir, and
/// returns the aggregate. Output is deterministic for fixed config and seeds.
RunSummary run_experiment(const ExperimentConfig& cfg);

/// The per-seed CSV column header for dimension D.
std::string csv_header(int dim);

}  // namespace featbo
