#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include "featbo/acquisition.hpp"
#include "featbo/benchmarks.hpp"
#include "featbo/surrogate.hpp"

namespace featbo {

struct BOConfig {
  int feature_dim = 10;      // dimensionality of the learned feature space
  int iterations = 300;      // optimization loop length
  int initial_points = 10;   // seeded initial design size
  double noise_variance = 1e-4;
  AcquisitionKind acquisition = AcquisitionKind::EI;
  double ucb_beta = 1.7320508075688772;
  bool constrained = true;
  bool latin_hypercube = false;  // initial design; default plain uniform
  DecoderStructure decoder;
  // The loop gives the decoder fixed reconstruction slack and a lengthscale
  // floor: a compressing feature space cannot reconstruct every coordinate,
  // and without the slack the decoder interpolates the unpredictable ones,
  // turning its posterior mean needle-sharp and strangling the Lipschitz
  // feasibility radius. (Learning the slack is bimodal and collapses into
  // the same interpolation regime.)
  ModelOptions model{.separate_decoder_noise = true,
                     .decoder_noise_variance = 1e-2,
                     .learn_decoder_noise = false,
                     .decoder_lengthscale_floor = 0.2};  // noise_variance overwritten from above
  int fit_restarts = 3;        // fresh restarts on the first fit
  MinimizeOptions fit_optimizer{1e-6, 150, 10};
  ProposeOptions proposal;
  std::uint64_t seed = 0;
};

struct BORecord {
  int iteration = 0;  // 0 for the initial design
  Eigen::VectorXd x;
  double y_noisy = 0.0;
  double f_true = 0.0;
  double best_y = 0.0;       // running best noisy observation
  double best_f_true = 0.0;  // running best true value (regret bookkeeping)
  double wall_ms = 0.0;
  // feature-space diagnostics; empty / NaN for initial-design rows
  Eigen::VectorXd z;
  double constraint = std::numeric_limits<double>::quiet_NaN();
  bool fit_degraded = false;
  bool proposal_fallback = false;
};

struct BOTrace {
  std::vector<BORecord> records;  // initial_points + iterations rows
  Eigen::VectorXd x_best;         // argmin of the noisy observations
  double y_best = 0.0;
  bool aborted = false;           // objective returned a non-finite value
  bool any_degraded_fit = false;
};

/// Per-iteration observer payload, used by tests to audit the surrogate and
/// the proposed feature-space point without re-running the loop.
struct IterationInfo {
  int iteration = 0;
  const JointSurrogate* surrogate = nullptr;
  Eigen::VectorXd z_star;
  double constraint = std::numeric_limits<double>::quiet_NaN();
  double lipschitz = std::numeric_limits<double>::quiet_NaN();
};
using IterationObserver = std::function<void(const IterationInfo&)>;

/// The full feature-space BO loop: seeded initial design, then per iteration
/// refit (warm start plus one fresh restart), acquisition maximization in
/// feature space, reconstruction, and noisy evaluation. Deterministic given
/// the config seed. A fit failure degrades the iteration to the previous
/// surrogate instead of halting; a non-finite observation aborts with the
/// partial trace flagged.
BOTrace run_bo(const EmbeddedObjective& objective, const BOConfig& cfg,
               const IterationObserver& observer = {});

/// log10 |best true value so far - f_min| per record, exact zeros floored at
/// 1e-16. Throws std::invalid_argument when f_min is unknown.
std::vector<double> immediate_log_regret(const BOTrace& trace, std::optional<double> f_min);

/// Uniform seeded sampling with the same observation-noise model and trace
/// format; the matched-budget comparator for the BO runs.
BOTrace random_search_baseline(const EmbeddedObjective& objective, int budget,
                               double noise_variance, std::uint64_t seed);

}  // namespace featbo
