#include "featbo/bo.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "featbo/common.hpp"

namespace featbo {

namespace {

double elapsed_ms(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

Eigen::MatrixXd initial_design(int n, int dim, bool latin_hypercube, Rng& rng) {
  Eigen::MatrixXd X(n, dim);
  if (!latin_hypercube) {
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < dim; ++c) X(r, c) = rng.uniform01();
    return X;
  }
  // Latin hypercube: one point per stratum per dimension, strata shuffled.
  std::vector<int> perm(n);
  for (int c = 0; c < dim; ++c) {
    for (int i = 0; i < n; ++i) perm[i] = i;
    for (int i = n - 1; i > 0; --i) {
      const int j = static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(i + 1));
      std::swap(perm[i], perm[j]);
    }
    for (int r = 0; r < n; ++r) X(r, c) = (perm[r] + rng.uniform01()) / n;
  }
  return X;
}

void append_record(BOTrace& trace, BORecord rec) {
  if (trace.records.empty()) {
    rec.best_y = rec.y_noisy;
    rec.best_f_true = rec.f_true;
  } else {
    const auto& prev = trace.records.back();
    rec.best_y = std::min(prev.best_y, rec.y_noisy);
    rec.best_f_true = std::min(prev.best_f_true, rec.f_true);
  }
  if (trace.records.empty() || rec.y_noisy <= trace.y_best) {
    trace.y_best = rec.y_noisy;
    trace.x_best = rec.x;
  }
  trace.records.push_back(std::move(rec));
}

}  // namespace

BOTrace run_bo(const EmbeddedObjective& objective, const BOConfig& cfg,
               const IterationObserver& observer) {
  const int D = objective.dim();
  if (cfg.feature_dim < 1 || cfg.feature_dim > D) {
    throw std::invalid_argument("run_bo: feature_dim must lie in [1, D]");
  }
  if (cfg.initial_points < 2) throw std::invalid_argument("run_bo: need initial_points >= 2");
  if (cfg.iterations < 0) throw std::invalid_argument("run_bo: iterations must be nonnegative");
  if (!(cfg.noise_variance > 0.0)) {
    throw std::invalid_argument("run_bo: noise_variance must be positive");
  }

  EmbeddedObjective obj = objective;
  obj.set_noise_variance(cfg.noise_variance);
  ModelOptions model = cfg.model;
  model.noise_variance = cfg.noise_variance;

  Rng master(cfg.seed);
  Rng init_rng = master.child(0);
  Rng noise_rng = master.child(1);
  const Rng fit_root = master.child(2);
  const Rng propose_root = master.child(3);

  BOTrace trace;
  Eigen::MatrixXd X = initial_design(cfg.initial_points, D, cfg.latin_hypercube, init_rng);
  Eigen::VectorXd y(cfg.initial_points);
  for (int r = 0; r < cfg.initial_points; ++r) {
    const auto [yn, ft] = obj.evaluate(X.row(r), noise_rng);
    if (!std::isfinite(yn)) {
      trace.aborted = true;
      return trace;
    }
    y[r] = yn;
    BORecord rec;
    rec.iteration = 0;
    rec.x = X.row(r);
    rec.y_noisy = yn;
    rec.f_true = ft;
    append_record(trace, std::move(rec));
  }

  std::optional<JointSurrogate> surrogate;
  std::optional<Eigen::VectorXd> warm;

  for (int t = 1; t <= cfg.iterations; ++t) {
    const auto t0 = std::chrono::steady_clock::now();

    bool fit_failed = false;
    FitConfig fc;
    fc.optimizer = cfg.fit_optimizer;
    fc.seed = fit_root.child(static_cast<std::uint64_t>(t)).seed();
    fc.restarts = warm.has_value() ? 2 : cfg.fit_restarts;  // warm start plus one fresh
    try {
      surrogate = fit(X, y, cfg.feature_dim, cfg.decoder, model, fc, warm);
    } catch (const NumericalError&) {
      fit_failed = true;  // keep proposing from the previous surrogate
    }
    const bool degraded = fit_failed || (surrogate.has_value() && surrogate->degraded());
    trace.any_degraded_fit = trace.any_degraded_fit || degraded;

    BORecord rec;
    rec.iteration = t;
    rec.fit_degraded = degraded;

    Eigen::VectorXd x_next;
    IterationInfo info;
    info.iteration = t;
    if (surrogate.has_value()) {
      AcquisitionSpec spec;
      spec.kind = cfg.acquisition;
      spec.beta = cfg.ucb_beta;
      spec.y_min = y.minCoeff();
      const Proposal prop =
          propose(*surrogate, spec, cfg.constrained,
                  propose_root.child(static_cast<std::uint64_t>(t)).seed(), cfg.proposal);
      x_next = surrogate->reconstruct(prop.z_star);
      rec.z = prop.z_star;
      rec.proposal_fallback = prop.fallback;
      info.surrogate = &*surrogate;
      info.z_star = prop.z_star;
      if (cfg.constrained) {
        rec.constraint = prop.constraint;
        info.constraint = prop.constraint;
        info.lipschitz = prop.lipschitz;
      }
      warm = surrogate->params();
    } else {
      // No surrogate has ever been built; keep the loop alive with a seeded
      // uniform proposal.
      Rng fallback_rng = propose_root.child(static_cast<std::uint64_t>(t));
      x_next.resize(D);
      for (int c = 0; c < D; ++c) x_next[c] = fallback_rng.uniform01();
      rec.proposal_fallback = true;
    }

    const auto [yn, ft] = obj.evaluate(x_next, noise_rng);
    if (!std::isfinite(yn)) {
      trace.aborted = true;
      return trace;
    }

    X.conservativeResize(X.rows() + 1, Eigen::NoChange);
    X.row(X.rows() - 1) = x_next.transpose();
    y.conservativeResize(y.size() + 1);
    y[y.size() - 1] = yn;

    rec.x = x_next;
    rec.y_noisy = yn;
    rec.f_true = ft;
    rec.wall_ms = elapsed_ms(t0);
    append_record(trace, std::move(rec));

    if (observer && surrogate.has_value()) observer(info);
  }
  return trace;
}

std::vector<double> immediate_log_regret(const BOTrace& trace, std::optional<double> f_min) {
  if (!f_min.has_value()) {
    throw std::invalid_argument("immediate_log_regret: f_min is unknown for this objective");
  }
  std::vector<double> out;
  out.reserve(trace.records.size());
  for (const auto& rec : trace.records) {
    const double gap = std::max(std::abs(rec.best_f_true - *f_min), 1e-16);
    out.push_back(std::log10(gap));
  }
  return out;
}

BOTrace random_search_baseline(const EmbeddedObjective& objective, int budget,
                               double noise_variance, std::uint64_t seed) {
  if (budget < 1) throw std::invalid_argument("random_search_baseline: budget must be >= 1");
  EmbeddedObjective obj = objective;
  obj.set_noise_variance(noise_variance);

  Rng master(seed);
  Rng sample_rng = master.child(0);
  Rng noise_rng = master.child(1);

  BOTrace trace;
  Eigen::VectorXd x(objective.dim());
  for (int t = 1; t <= budget; ++t) {
    for (Eigen::Index c = 0; c < x.size(); ++c) x[c] = sample_rng.uniform01();
    const auto [yn, ft] = obj.evaluate(x, noise_rng);
    if (!std::isfinite(yn)) {
      trace.aborted = true;
      return trace;
    }
    BORecord rec;
    rec.iteration = t;
    rec.x = x;
    rec.y_noisy = yn;
    rec.f_true = ft;
    append_record(trace, std::move(rec));
  }
  return trace;
}

}  // namespace featbo
