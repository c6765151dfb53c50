#include <cstdio>
#include <exception>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "featbo/benchmarks.hpp"
#include "featbo/experiment.hpp"

namespace {

// CLI flags override the corresponding config keys before resolution.
std::string apply_overrides(const std::string& text, const std::string& out_dir,
                            const std::string& seeds, const std::string& profile) {
  nlohmann::json j = nlohmann::json::parse(text);
  if (!out_dir.empty()) j["output_dir"] = out_dir;
  if (!profile.empty()) j["profile"] = profile;
  if (!seeds.empty()) {
    std::vector<std::uint64_t> parsed;
    std::size_t at = 0;
    while (at < seeds.size()) {
      const std::size_t comma = seeds.find(',', at);
      const std::string tok = seeds.substr(at, comma == std::string::npos ? std::string::npos
                                                                          : comma - at);
      parsed.push_back(std::stoull(tok));
      if (comma == std::string::npos) break;
      at = comma + 1;
    }
    j["seeds"] = parsed;
  }
  return j.dump();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"featbo: feature-space Bayesian optimization benchmark runner"};
  app.require_subcommand(1);

  std::string config_path, out_dir, seeds, profile;
  CLI::App* run = app.add_subcommand("run", "run a configured experiment");
  run->add_option("--config", config_path, "JSON experiment config")->required();
  run->add_option("--out", out_dir, "output directory (overrides the config)");
  run->add_option("--seeds", seeds, "comma-separated seed list (overrides the config)");
  run->add_option("--profile", profile, "profile override: ci or full");

  CLI::App* list = app.add_subcommand("list-benchmarks", "print the benchmark registry");

  CLI11_PARSE(app, argc, argv);

  if (list->parsed()) {
    for (const auto& b : featbo::benchmark_registry()) {
      std::printf("%-22s D=%-3d d_fs*=%-3d %s\n", b.name.c_str(), b.objective.dim(),
                  b.default_feature_dim, b.description.c_str());
    }
    return 0;
  }

  featbo::ExperimentConfig cfg;
  try {
    std::ifstream in(config_path);
    if (!in) {
      std::fprintf(stderr, "error: cannot open config file: %s\n", config_path.c_str());
      return 2;
    }
    std::stringstream ss;
    ss << in.rdbuf();
    cfg = featbo::parse_config(apply_overrides(ss.str(), out_dir, seeds, profile));
  } catch (const std::exception& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  }

  try {
    const featbo::RunSummary summary = featbo::run_experiment(cfg);
    std::printf("wrote %zu per-seed CSVs and summary.json to %s (%.1f s total)\n",
                cfg.seeds.size(), cfg.output_dir.c_str(), summary.total_wall_ms / 1000.0);
    if (!summary.mean_log_regret.empty()) {
      std::printf("final mean log10 regret: %.4f\n", summary.mean_log_regret.back());
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "runtime failure: %s\n", e.what());
    return 3;
  }
  return 0;
}
