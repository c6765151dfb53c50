#include "featbo/numopt.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <stdexcept>

#include "featbo/rng.hpp"

namespace featbo {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool all_finite(const Eigen::VectorXd& v) { return v.allFinite(); }

// Infinity norm of x - P(x - g), the usual box-projected gradient measure.
double projected_gradient_norm(const Eigen::VectorXd& x, const Eigen::VectorXd& g,
                               const BoxBounds& b) {
  double m = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double p = std::min(b.upper[i], std::max(b.lower[i], x[i] - g[i]));
    m = std::max(m, std::abs(x[i] - p));
  }
  return m;
}

}  // namespace

BoxBounds::BoxBounds(Eigen::VectorXd lo, Eigen::VectorXd hi)
    : lower(std::move(lo)), upper(std::move(hi)) {
  if (lower.size() != upper.size() || lower.size() == 0) {
    throw std::invalid_argument("BoxBounds: bound vectors must be nonempty and equal length");
  }
  for (Eigen::Index i = 0; i < lower.size(); ++i) {
    if (!std::isfinite(lower[i]) || !std::isfinite(upper[i]) || !(lower[i] < upper[i])) {
      throw std::invalid_argument("BoxBounds: need finite lower < upper in every coordinate");
    }
  }
}

BoxBounds BoxBounds::cube(Eigen::Index dim, double lo, double hi) {
  return BoxBounds(Eigen::VectorXd::Constant(dim, lo), Eigen::VectorXd::Constant(dim, hi));
}

Eigen::VectorXd BoxBounds::clamp(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  return x.cwiseMax(lower).cwiseMin(upper);
}

bool BoxBounds::contains(const Eigen::Ref<const Eigen::VectorXd>& x, double slack) const {
  if (x.size() != dim()) return false;
  return ((x.array() >= lower.array() - slack) && (x.array() <= upper.array() + slack)).all();
}

OptimResult minimize_box(const GradObjective& f, const Eigen::VectorXd& x0, const BoxBounds& bounds,
                         const MinimizeOptions& opts) {
  if (x0.size() != bounds.dim()) {
    throw std::invalid_argument("minimize_box: x0 length does not match bounds");
  }
  const Eigen::Index n = x0.size();
  const double c1 = 1e-4;
  const double c2 = 0.9;

  // Evaluation wrapper: a non-finite value or gradient is reported as +inf so
  // the line search backs away from it.
  auto eval = [&](const Eigen::VectorXd& x, Eigen::VectorXd& g) -> double {
    const double v = f(x, g);
    if (!std::isfinite(v) || !all_finite(g)) return kInf;
    return v;
  };

  OptimResult res;
  Eigen::VectorXd x = bounds.clamp(x0);
  Eigen::VectorXd g(n);
  double fx = eval(x, g);
  res.x_opt = x;
  res.f_opt = fx;
  if (!std::isfinite(fx)) {
    return res;  // nothing usable at the start point
  }
  res.trace.push_back(fx);

  std::deque<Eigen::VectorXd> hist_s, hist_y;
  std::deque<double> hist_rho;

  const Eigen::VectorXd width = bounds.upper - bounds.lower;

  for (int iter = 0; iter < opts.max_iter; ++iter) {
    if (projected_gradient_norm(x, g, bounds) <= opts.tol) {
      res.converged = true;
      break;
    }
    res.iterations = iter + 1;

    // Zero any direction component that would immediately leave the box
    // through an active bound; applied to the gradient used for the
    // two-loop recursion and to the resulting step direction.
    const auto mask_outward = [&](Eigen::VectorXd& v) {
      for (Eigen::Index i = 0; i < n; ++i) {
        const double eps = 1e-12 * width[i];
        if ((x[i] - bounds.lower[i] <= eps && v[i] < 0.0) ||
            (bounds.upper[i] - x[i] <= eps && v[i] > 0.0)) {
          v[i] = 0.0;
        }
      }
    };
    Eigen::VectorXd gm = g;
    {
      Eigen::VectorXd desc = -gm;
      mask_outward(desc);
      gm = -desc;
    }

    // Two-loop recursion on the free gradient.
    Eigen::VectorXd d = -gm;
    if (!hist_s.empty()) {
      std::vector<double> alpha_hist(hist_s.size());
      Eigen::VectorXd q = gm;
      for (std::size_t i = hist_s.size(); i-- > 0;) {
        alpha_hist[i] = hist_rho[i] * hist_s[i].dot(q);
        q -= alpha_hist[i] * hist_y[i];
      }
      const double gamma = hist_s.back().dot(hist_y.back()) / hist_y.back().squaredNorm();
      q *= gamma;
      for (std::size_t i = 0; i < hist_s.size(); ++i) {
        const double beta = hist_rho[i] * hist_y[i].dot(q);
        q += (alpha_hist[i] - beta) * hist_s[i];
      }
      d = -q;
      mask_outward(d);
    }
    double dphi0 = g.dot(d);
    if (!(dphi0 < -1e-16 * d.norm() * g.norm()) || !all_finite(d)) {
      d = -gm;  // not a descent direction; fall back to projected steepest descent
      dphi0 = g.dot(d);
      if (!(dphi0 < 0.0)) break;  // fully constrained, nothing to do
    }

    // Largest step that stays inside the box.
    double amax = kInf;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (d[i] > 0.0) amax = std::min(amax, (bounds.upper[i] - x[i]) / d[i]);
      if (d[i] < 0.0) amax = std::min(amax, (bounds.lower[i] - x[i]) / d[i]);
    }
    if (!(amax > 0.0)) break;

    // Strong-Wolfe search, capped at amax; a step accepted exactly at the cap
    // only needs sufficient decrease (a bound became active).
    Eigen::VectorXd x_t(n), g_t(n);
    double f_t = kInf;
    double accepted = -1.0;

    auto probe = [&](double a) {
      x_t = bounds.clamp(x + a * d);
      f_t = eval(x_t, g_t);
    };

    double alpha = std::min(1.0, amax);
    double a_prev = 0.0, f_prev = fx;
    double zoom_lo = -1.0, zoom_hi = -1.0, f_lo = 0.0;
    for (int ls = 0; ls < 30 && accepted < 0.0 && zoom_lo < 0.0; ++ls) {
      probe(alpha);
      const double dphi = std::isfinite(f_t) ? g_t.dot(d) : kInf;
      if (f_t > fx + c1 * alpha * dphi0 || (ls > 0 && f_t >= f_prev)) {
        zoom_lo = a_prev;
        f_lo = f_prev;
        zoom_hi = alpha;
        break;
      }
      if (std::abs(dphi) <= -c2 * dphi0) {
        accepted = alpha;
        break;
      }
      if (dphi >= 0.0) {
        zoom_lo = alpha;
        f_lo = f_t;
        zoom_hi = a_prev;
        break;
      }
      if (alpha >= amax * (1.0 - 1e-12)) {
        accepted = alpha;  // capped by the box, Armijo already holds
        break;
      }
      a_prev = alpha;
      f_prev = f_t;
      alpha = std::min(2.0 * alpha, amax);
    }
    if (accepted < 0.0 && zoom_lo >= 0.0) {
      for (int zi = 0; zi < 30; ++zi) {
        alpha = 0.5 * (zoom_lo + zoom_hi);
        probe(alpha);
        const double dphi = std::isfinite(f_t) ? g_t.dot(d) : kInf;
        if (f_t > fx + c1 * alpha * dphi0 || f_t >= f_lo) {
          zoom_hi = alpha;
        } else {
          if (std::abs(dphi) <= -c2 * dphi0) {
            accepted = alpha;
            break;
          }
          if (dphi * (zoom_hi - zoom_lo) >= 0.0) zoom_hi = zoom_lo;
          zoom_lo = alpha;
          f_lo = f_t;
        }
        if (std::abs(zoom_hi - zoom_lo) < 1e-16 * std::max(1.0, std::abs(zoom_lo))) break;
      }
      if (accepted < 0.0 && zoom_lo > 0.0) {
        probe(zoom_lo);  // best sufficient-decrease point found
        if (f_t <= fx + c1 * zoom_lo * dphi0 && std::isfinite(f_t)) accepted = zoom_lo;
      }
    }
    if (accepted < 0.0) break;  // no usable step; return best iterate so far
    if (std::abs(accepted - alpha) > 0.0) probe(accepted);

    const Eigen::VectorXd s = x_t - x;
    const Eigen::VectorXd yv = g_t - g;
    x = x_t;
    fx = f_t;
    g = g_t;
    res.trace.push_back(fx);

    const double sy = s.dot(yv);
    if (sy > 1e-10 * s.norm() * yv.norm()) {
      hist_s.push_back(s);
      hist_y.push_back(yv);
      hist_rho.push_back(1.0 / sy);
      if (static_cast<int>(hist_s.size()) > opts.memory) {
        hist_s.pop_front();
        hist_y.pop_front();
        hist_rho.pop_front();
      }
    }
  }

  res.x_opt = x;
  res.f_opt = fx;
  return res;
}

GradObjective with_fd_gradient(const Objective& f, const BoxBounds& bounds, double step) {
  return [f, bounds, step](const Eigen::VectorXd& x, Eigen::VectorXd& grad) -> double {
    const double fx = f(x);
    Eigen::VectorXd xp = x;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const double hi = std::min(x[i] + step, bounds.upper[i]);
      const double lo = std::max(x[i] - step, bounds.lower[i]);
      if (hi <= lo) {
        grad[i] = 0.0;
        continue;
      }
      xp[i] = hi;
      const double fp = f(xp);
      xp[i] = lo;
      const double fm = f(xp);
      xp[i] = x[i];
      grad[i] = (fp - fm) / (hi - lo);
    }
    return fx;
  };
}

namespace {

struct Candidate {
  double score = -kInf;  // ranking key (higher is better)
  double fval = -kInf;
  double gval = 0.0;
  int order = 0;  // position in the candidate pool; lower wins ties
  Eigen::VectorXd x;
};

bool better(const Candidate& a, const Candidate& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.order < b.order;
}

// Keeps the k best candidates by (score desc, order asc); O(k) memory so the
// sample stream never needs to be stored.
class TopK {
 public:
  explicit TopK(int k) : k_(k) {}

  void offer(const Candidate& c) {
    if (static_cast<int>(items_.size()) == k_ && !better(c, items_.back())) return;
    auto it = std::upper_bound(items_.begin(), items_.end(), c, better);
    items_.insert(it, c);
    if (static_cast<int>(items_.size()) > k_) items_.pop_back();
  }

  const std::vector<Candidate>& items() const { return items_; }

 private:
  int k_;
  std::vector<Candidate> items_;
};

// Streams the candidate pool in a fixed order: extra starts first, then
// n_random seeded uniform samples.
template <typename Visit>
void visit_candidates(const BoxBounds& bounds, int n_random, std::uint64_t seed,
                      const std::vector<Eigen::VectorXd>& extra_starts, Visit&& visit) {
  int order = 0;
  for (const auto& e : extra_starts) visit(order++, bounds.clamp(e));
  Rng rng(seed);
  Eigen::VectorXd x(bounds.dim());
  for (int i = 0; i < n_random; ++i) {
    for (Eigen::Index j = 0; j < x.size(); ++j) x[j] = rng.uniform(bounds.lower[j], bounds.upper[j]);
    visit(order++, x);
  }
}

}  // namespace

OptimResult multistart_maximize(const Objective& f, const BoxBounds& bounds,
                                const MultistartOptions& opts, std::uint64_t seed,
                                const std::vector<Eigen::VectorXd>& extra_starts) {
  if (opts.n_random < 1 || opts.n_top < 1 || opts.n_top > opts.n_random) {
    throw std::invalid_argument("multistart_maximize: need 1 <= n_top <= n_random");
  }
  TopK top(opts.n_top + static_cast<int>(extra_starts.size()));
  Candidate best_sample;
  visit_candidates(bounds, opts.n_random, seed, extra_starts, [&](int order, const Eigen::VectorXd& x) {
    Candidate c;
    c.x = x;
    c.order = order;
    c.fval = f(x);
    c.score = std::isfinite(c.fval) ? c.fval : -kInf;
    if (best_sample.x.size() == 0 || better(c, best_sample)) best_sample = c;
    top.offer(c);
  });

  const GradObjective neg_f =
      with_fd_gradient([&f](const Eigen::VectorXd& x) { return -f(x); }, bounds, opts.fd_step);

  Candidate winner = best_sample;
  OptimResult winner_local;
  int total_iters = 0;
  for (const auto& start : top.items()) {
    if (!std::isfinite(start.fval)) continue;
    OptimResult local = minimize_box(neg_f, start.x, bounds, opts.local);
    total_iters += local.iterations;
    Candidate c;
    c.x = local.x_opt;
    c.fval = -local.f_opt;
    c.score = c.fval;
    c.order = start.order;
    if (better(c, winner)) {
      winner = c;
      winner_local = local;
    }
  }

  OptimResult res;
  res.x_opt = winner.x;
  res.f_opt = winner.fval;
  res.iterations = total_iters;
  res.converged = std::isfinite(winner.fval);
  res.trace = winner_local.trace;
  return res;
}

OptimResult maximize_constrained(const Objective& f, const Objective& g, const BoxBounds& bounds,
                                 const MultistartOptions& opts, std::uint64_t seed,
                                 const std::vector<Eigen::VectorXd>& extra_starts) {
  if (opts.n_random < 1 || opts.n_top < 1 || opts.n_top > opts.n_random) {
    throw std::invalid_argument("maximize_constrained: need 1 <= n_top <= n_random");
  }
  const double feas_tol = -1e-8;

  // Pass 1 over the stream: f-scale for the penalty plus the feasible and
  // anchor incumbents. The ranking pass needs f_scale, so sampling runs twice
  // with the same seed rather than holding the pool in memory.
  double f_scale = 1.0;
  Candidate best_feasible, best_extra, best_overall;
  bool any_feasible = false;
  const int n_extras = static_cast<int>(extra_starts.size());
  visit_candidates(bounds, opts.n_random, seed, extra_starts, [&](int order, const Eigen::VectorXd& x) {
    Candidate c;
    c.x = x;
    c.order = order;
    c.fval = f(x);
    c.gval = g(x);
    c.score = std::isfinite(c.fval) ? c.fval : -kInf;
    if (std::isfinite(c.fval)) f_scale = std::max(f_scale, std::abs(c.fval));
    if (c.gval >= feas_tol && std::isfinite(c.fval)) {
      if (!any_feasible || better(c, best_feasible)) best_feasible = c;
      any_feasible = true;
    }
    if (order < n_extras && (best_extra.x.size() == 0 || better(c, best_extra))) best_extra = c;
    if (best_overall.x.size() == 0 || better(c, best_overall)) best_overall = c;
  });

  auto violation = [](double gv) { return std::min(0.0, gv); };

  TopK top(opts.n_top + n_extras);
  visit_candidates(bounds, opts.n_random, seed, extra_starts, [&](int order, const Eigen::VectorXd& x) {
    Candidate c;
    c.x = x;
    c.order = order;
    c.fval = f(x);
    c.gval = g(x);
    const double v = violation(c.gval);
    c.score = std::isfinite(c.fval) ? c.fval - f_scale * v * v : -kInf;
    top.offer(c);
  });

  const GradObjective fd_g = with_fd_gradient(g, bounds, opts.fd_step);

  int total_iters = 0;
  OptimResult winner_local;
  Candidate winner = best_feasible;
  for (const auto& start : top.items()) {
    if (!std::isfinite(start.fval)) continue;
    Eigen::VectorXd xcur = start.x;
    OptimResult local;
    for (int k = 0; k <= 4; ++k) {
      const double mu = std::pow(10.0, k) * f_scale;
      const Objective penalized = [&f, &g, mu, violation](const Eigen::VectorXd& x) {
        const double v = violation(g(x));
        return -f(x) + mu * v * v;
      };
      local = minimize_box(with_fd_gradient(penalized, bounds, opts.fd_step), xcur, bounds,
                           opts.local);
      total_iters += local.iterations;
      xcur = local.x_opt;
    }

    // Penalty solutions sit O(1/mu) outside the boundary; walk back onto
    // g = 0 along the constraint gradient.
    double gval = g(xcur);
    for (int pi = 0; pi < 30 && gval < 0.0; ++pi) {
      Eigen::VectorXd gg(xcur.size());
      fd_g(xcur, gg);
      const double nn = gg.squaredNorm();
      if (!(nn > 1e-30)) break;
      xcur = bounds.clamp(xcur + ((-gval + 1e-12) / nn) * gg);
      gval = g(xcur);
    }

    Candidate c;
    c.x = xcur;
    c.fval = f(xcur);
    c.gval = gval;
    c.score = c.fval;
    c.order = start.order;
    if (c.gval >= feas_tol && std::isfinite(c.fval)) {
      if (!any_feasible || better(c, winner)) {
        winner = c;
        winner_local = local;
      }
      any_feasible = true;
    }
  }

  OptimResult res;
  res.iterations = total_iters;
  if (any_feasible) {
    res.x_opt = winner.x;
    res.f_opt = winner.fval;
    res.converged = true;
    res.trace = winner_local.trace;
    return res;
  }

  // Nothing feasible anywhere: fall back to the best-f anchor (extra starts
  // when provided, otherwise the best sample).
  res.fallback = true;
  res.converged = false;
  const Candidate& fb = (n_extras > 0) ? best_extra : best_overall;
  res.x_opt = fb.x;
  res.f_opt = fb.fval;
  return res;
}

}  // namespace featbo
