#include "featbo/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "featbo/benchmarks.hpp"

namespace featbo {

namespace {

using nlohmann::json;

std::string acquisition_name(AcquisitionKind k) {
  switch (k) {
    case AcquisitionKind::PI: return "PI";
    case AcquisitionKind::EI: return "EI";
    case AcquisitionKind::UCB: return "UCB";
  }
  return "EI";
}

AcquisitionKind acquisition_from_name(const std::string& s) {
  if (s == "PI") return AcquisitionKind::PI;
  if (s == "EI") return AcquisitionKind::EI;
  if (s == "UCB") return AcquisitionKind::UCB;
  throw ConfigError("config key \"acquisition\" must be one of PI, EI, UCB (got \"" + s + "\")");
}

std::string decoder_name(DecoderVariant v) {
  switch (v) {
    case DecoderVariant::FullICM: return "full-icm";
    case DecoderVariant::BlockSharedKernel: return "block-shared";
    case DecoderVariant::BlockSeparateKernels: return "block-separate";
  }
  return "full-icm";
}

DecoderVariant decoder_from_name(const std::string& s) {
  if (s == "full-icm") return DecoderVariant::FullICM;
  if (s == "block-shared") return DecoderVariant::BlockSharedKernel;
  if (s == "block-separate") return DecoderVariant::BlockSeparateKernels;
  throw ConfigError("config key \"decoder\" must be one of full-icm, block-shared, block-separate");
}

// %.17g round-trips doubles exactly and keeps the files byte-stable.
std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

template <typename T>
T take(json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    T v = j.at(key).get<T>();
    j.erase(key);
    return v;
  } catch (const json::exception&) {
    throw ConfigError(std::string("config key \"") + key + "\" has the wrong type");
  }
}

void require_range(bool ok, const char* key, const char* what) {
  if (!ok) throw ConfigError(std::string("config key \"") + key + "\" " + what);
}

int thread_cap() {
  if (const char* env = std::getenv("FEATBO_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

}  // namespace

ExperimentConfig default_config(const std::string& profile) {
  ExperimentConfig cfg;
  cfg.profile = profile;
  if (profile == "full") {
    cfg.benchmark = "rosenbrock-linear";
    cfg.seeds.resize(20);
    for (int i = 0; i < 20; ++i) cfg.seeds[i] = static_cast<std::uint64_t>(i + 1);
    cfg.bo.iterations = 300;
    cfg.bo.initial_points = 10;
    cfg.bo.fit_restarts = 3;
    cfg.bo.fit_optimizer = MinimizeOptions{1e-6, 150, 10};
    cfg.bo.proposal.search = MultistartOptions{5000, 100, MinimizeOptions{1e-6, 60, 10}, 1e-6};
    cfg.bo.proposal.lipschitz.search = MultistartOptions{2000, 20, MinimizeOptions{1e-6, 40, 10}, 1e-6};
  } else if (profile == "ci") {
    cfg.benchmark = "sines-identity-small";
    cfg.seeds = {1, 2};
    cfg.bo.iterations = 15;
    cfg.bo.initial_points = 10;
    cfg.bo.fit_restarts = 2;
    cfg.bo.fit_optimizer = MinimizeOptions{1e-6, 80, 10};
    cfg.bo.proposal.search = MultistartOptions{400, 20, MinimizeOptions{1e-6, 40, 10}, 1e-6};
    cfg.bo.proposal.lipschitz.search = MultistartOptions{400, 10, MinimizeOptions{1e-6, 30, 10}, 1e-6};
  } else {
    throw ConfigError("config key \"profile\" must be \"full\" or \"ci\" (got \"" + profile + "\")");
  }
  const BenchmarkInfo* info = find_benchmark(cfg.benchmark);
  cfg.bo.feature_dim = info->default_feature_dim;
  return cfg;
}

ExperimentConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");

  const std::string profile = take<std::string>(j, "profile", "full");
  ExperimentConfig cfg = default_config(profile);

  cfg.benchmark = take<std::string>(j, "benchmark", cfg.benchmark);
  const BenchmarkInfo* info = find_benchmark(cfg.benchmark);
  if (info == nullptr) {
    throw ConfigError("config key \"benchmark\" names no registered benchmark: \"" + cfg.benchmark +
                      "\"");
  }
  cfg.bo.feature_dim = info->default_feature_dim;

  cfg.output_dir = take<std::string>(j, "output_dir", cfg.output_dir);
  cfg.parallelism = take<int>(j, "parallelism", cfg.parallelism);
  require_range(cfg.parallelism >= 0, "parallelism", "must be >= 0");
  cfg.csv_wall_ms = take<bool>(j, "csv_wall_ms", cfg.csv_wall_ms);

  if (j.contains("seeds")) {
    std::vector<std::uint64_t> seeds;
    try {
      seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    } catch (const json::exception&) {
      throw ConfigError("config key \"seeds\" must be an array of nonnegative integers");
    }
    j.erase("seeds");
    cfg.seeds = std::move(seeds);
  }
  require_range(!cfg.seeds.empty(), "seeds", "must be nonempty");
  {
    auto sorted = cfg.seeds;
    std::sort(sorted.begin(), sorted.end());
    require_range(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end(), "seeds",
                  "must be distinct");
  }

  cfg.bo.iterations = take<int>(j, "iterations", cfg.bo.iterations);
  require_range(cfg.bo.iterations >= 1, "iterations", "must be >= 1");
  cfg.bo.initial_points = take<int>(j, "initial_points", cfg.bo.initial_points);
  require_range(cfg.bo.initial_points >= 2, "initial_points", "must be >= 2");
  cfg.bo.feature_dim = take<int>(j, "feature_dim", cfg.bo.feature_dim);
  require_range(cfg.bo.feature_dim >= 1 && cfg.bo.feature_dim <= info->objective.dim(),
                "feature_dim", "must lie in [1, D]");
  cfg.bo.noise_variance = take<double>(j, "noise_variance", cfg.bo.noise_variance);
  require_range(cfg.bo.noise_variance > 0.0, "noise_variance", "must be > 0");
  cfg.bo.acquisition = acquisition_from_name(
      take<std::string>(j, "acquisition", acquisition_name(cfg.bo.acquisition)));
  cfg.bo.ucb_beta = take<double>(j, "ucb_beta", cfg.bo.ucb_beta);
  require_range(cfg.bo.ucb_beta > 0.0, "ucb_beta", "must be > 0");
  cfg.bo.constrained = take<bool>(j, "constrained", cfg.bo.constrained);
  cfg.bo.latin_hypercube = take<bool>(j, "latin_hypercube", cfg.bo.latin_hypercube);
  cfg.bo.decoder.variant =
      decoder_from_name(take<std::string>(j, "decoder", decoder_name(cfg.bo.decoder.variant)));
  cfg.bo.decoder.block_size = take<int>(j, "block_size", cfg.bo.decoder.block_size);
  require_range(cfg.bo.decoder.block_size >= 1, "block_size", "must be >= 1");
  cfg.bo.decoder.latent_count = take<int>(j, "latent_count", cfg.bo.decoder.latent_count);
  require_range(cfg.bo.decoder.latent_count >= 0, "latent_count", "must be >= 0 (0: full rank)");
  cfg.bo.model.learn_noise = take<bool>(j, "learn_noise", cfg.bo.model.learn_noise);
  cfg.bo.model.separate_decoder_noise =
      take<bool>(j, "separate_decoder_noise", cfg.bo.model.separate_decoder_noise);
  cfg.bo.model.decoder_noise_variance =
      take<double>(j, "decoder_noise_init", cfg.bo.model.decoder_noise_variance);
  require_range(cfg.bo.model.decoder_noise_variance > 0.0, "decoder_noise_init", "must be > 0");
  cfg.bo.model.decoder_lengthscale_floor =
      take<double>(j, "decoder_lengthscale_floor", cfg.bo.model.decoder_lengthscale_floor);
  require_range(cfg.bo.model.decoder_lengthscale_floor >= 0.0, "decoder_lengthscale_floor",
                "must be >= 0");
  cfg.bo.model.hidden_dim = take<int>(j, "hidden_units", cfg.bo.model.hidden_dim);
  require_range(cfg.bo.model.hidden_dim >= 1, "hidden_units", "must be >= 1");
  cfg.bo.fit_restarts = take<int>(j, "restarts", cfg.bo.fit_restarts);
  require_range(cfg.bo.fit_restarts >= 1, "restarts", "must be >= 1");
  cfg.bo.fit_optimizer.max_iter = take<int>(j, "fit_max_iter", cfg.bo.fit_optimizer.max_iter);
  require_range(cfg.bo.fit_optimizer.max_iter >= 1, "fit_max_iter", "must be >= 1");
  cfg.bo.proposal.search.n_random = take<int>(j, "n_random", cfg.bo.proposal.search.n_random);
  require_range(cfg.bo.proposal.search.n_random >= 1, "n_random", "must be >= 1");
  cfg.bo.proposal.search.n_top = take<int>(j, "n_top", cfg.bo.proposal.search.n_top);
  require_range(cfg.bo.proposal.search.n_top >= 1 &&
                    cfg.bo.proposal.search.n_top <= cfg.bo.proposal.search.n_random,
                "n_top", "must satisfy 1 <= n_top <= n_random");

  if (!j.empty()) {
    throw ConfigError("config contains unknown key \"" + j.begin().key() + "\"");
  }
  return cfg;
}

ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string serialize_config(const ExperimentConfig& cfg) {
  json j;
  j["profile"] = cfg.profile;
  j["benchmark"] = cfg.benchmark;
  j["seeds"] = cfg.seeds;
  j["output_dir"] = cfg.output_dir;
  j["parallelism"] = cfg.parallelism;
  j["csv_wall_ms"] = cfg.csv_wall_ms;
  j["iterations"] = cfg.bo.iterations;
  j["initial_points"] = cfg.bo.initial_points;
  j["feature_dim"] = cfg.bo.feature_dim;
  j["noise_variance"] = cfg.bo.noise_variance;
  j["acquisition"] = acquisition_name(cfg.bo.acquisition);
  j["ucb_beta"] = cfg.bo.ucb_beta;
  j["constrained"] = cfg.bo.constrained;
  j["latin_hypercube"] = cfg.bo.latin_hypercube;
  j["decoder"] = decoder_name(cfg.bo.decoder.variant);
  j["block_size"] = cfg.bo.decoder.block_size;
  j["latent_count"] = cfg.bo.decoder.latent_count;
  j["learn_noise"] = cfg.bo.model.learn_noise;
  j["separate_decoder_noise"] = cfg.bo.model.separate_decoder_noise;
  j["decoder_noise_init"] = cfg.bo.model.decoder_noise_variance;
  j["decoder_lengthscale_floor"] = cfg.bo.model.decoder_lengthscale_floor;
  j["hidden_units"] = cfg.bo.model.hidden_dim;
  j["restarts"] = cfg.bo.fit_restarts;
  j["fit_max_iter"] = cfg.bo.fit_optimizer.max_iter;
  j["n_random"] = cfg.bo.proposal.search.n_random;
  j["n_top"] = cfg.bo.proposal.search.n_top;
  return j.dump(2);
}

std::string csv_header(int dim) {
  std::string h = "iteration";
  for (int i = 1; i <= dim; ++i) h += ",proposed_x" + std::to_string(i);
  h += ",y_noisy,f_true,best_f_true,log10_regret,wall_ms";
  return h;
}

namespace {

void write_csv(const std::string& path, const BOTrace& trace, std::optional<double> f_min,
               int dim, bool include_wall) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open output file: " + path);
  out << csv_header(dim) << "\n";
  std::vector<double> regret;
  if (f_min.has_value()) regret = immediate_log_regret(trace, f_min);
  for (std::size_t i = 0; i < trace.records.size(); ++i) {
    const auto& r = trace.records[i];
    out << r.iteration;
    for (int c = 0; c < dim; ++c) out << ',' << fmt(r.x[c]);
    out << ',' << fmt(r.y_noisy) << ',' << fmt(r.f_true) << ',' << fmt(r.best_f_true) << ','
        << (f_min.has_value() ? fmt(regret[i]) : "nan") << ','
        << fmt(include_wall ? r.wall_ms : 0.0) << "\n";
  }
}

}  // namespace

RunSummary run_experiment(const ExperimentConfig& cfg) {
  const BenchmarkInfo* info = find_benchmark(cfg.benchmark);
  if (info == nullptr) throw ConfigError("unknown benchmark: " + cfg.benchmark);
  if (cfg.seeds.empty()) throw ConfigError("config key \"seeds\" must be nonempty");

  const auto t_start = std::chrono::steady_clock::now();
  const int n_seeds = static_cast<int>(cfg.seeds.size());
  std::vector<BOTrace> traces(n_seeds);

  int workers = cfg.parallelism > 0 ? cfg.parallelism : thread_cap();
  workers = std::min({workers, thread_cap(), n_seeds});

  std::atomic<int> next{0};
  auto work = [&]() {
    for (int i = next.fetch_add(1); i < n_seeds; i = next.fetch_add(1)) {
      BOConfig bo = cfg.bo;
      bo.seed = cfg.seeds[i];
      traces[i] = run_bo(info->objective, bo);
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }

  std::filesystem::create_directories(cfg.output_dir);
  for (int i = 0; i < n_seeds; ++i) {
    const std::string path = cfg.output_dir + "/" + cfg.benchmark + "_seed" +
                             std::to_string(cfg.seeds[i]) + ".csv";
    write_csv(path, traces[i], info->objective.f_min(), info->objective.dim(), cfg.csv_wall_ms);
  }

  RunSummary summary;
  const int T = cfg.bo.iterations;
  summary.mean_log_regret.assign(T, 0.0);
  summary.stderr_log_regret.assign(T, 0.0);
  std::vector<std::vector<double>> regrets(n_seeds);
  for (int i = 0; i < n_seeds; ++i) {
    if (info->objective.f_min().has_value()) {
      regrets[i] = immediate_log_regret(traces[i], info->objective.f_min());
    }
    SeedResult sr;
    sr.seed = cfg.seeds[i];
    sr.final_best_f_true = traces[i].records.back().best_f_true;
    sr.final_log_regret = regrets[i].empty() ? std::numeric_limits<double>::quiet_NaN()
                                             : regrets[i].back();
    for (const auto& r : traces[i].records) sr.wall_ms += r.wall_ms;
    summary.per_seed.push_back(sr);
  }
  // Regret series over the T BO iterations (the tail of the per-record
  // series; the first initial_points records share iteration index 0).
  for (int t = 0; t < T; ++t) {
    double mean = std::numeric_limits<double>::quiet_NaN();
    double se = std::numeric_limits<double>::quiet_NaN();
    if (info->objective.f_min().has_value()) {
      double acc = 0.0;
      for (int i = 0; i < n_seeds; ++i) acc += regrets[i][cfg.bo.initial_points + t];
      mean = acc / n_seeds;
      if (n_seeds > 1) {
        double ss = 0.0;
        for (int i = 0; i < n_seeds; ++i) {
          const double d = regrets[i][cfg.bo.initial_points + t] - mean;
          ss += d * d;
        }
        se = std::sqrt(ss / (n_seeds - 1)) / std::sqrt(static_cast<double>(n_seeds));
      } else {
        se = 0.0;
      }
    }
    summary.mean_log_regret[t] = mean;
    summary.stderr_log_regret[t] = se;
  }
  summary.total_wall_ms = std::chrono::duration<double, std::milli>(
                              std::chrono::steady_clock::now() - t_start)
                              .count();

  json js;
  js["config"] = json::parse(serialize_config(cfg));
  js["benchmark"] = cfg.benchmark;
  js["mean_log10_regret"] = summary.mean_log_regret;
  js["stderr_log10_regret"] = summary.stderr_log_regret;
  js["total_wall_ms"] = summary.total_wall_ms;
  js["per_seed"] = json::array();
  for (const auto& sr : summary.per_seed) {
    js["per_seed"].push_back({{"seed", sr.seed},
                              {"final_best_f_true", sr.final_best_f_true},
                              {"final_log10_regret", sr.final_log_regret},
                              {"wall_ms", sr.wall_ms}});
  }
  std::ofstream out(cfg.output_dir + "/summary.json", std::ios::binary);
  if (!out) throw std::runtime_error("cannot open output file: " + cfg.output_dir + "/summary.json");
  out << js.dump(2) << "\n";
  return summary;
}

}  // namespace featbo
