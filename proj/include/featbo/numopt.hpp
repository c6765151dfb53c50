#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <vector>

namespace featbo {

/// Finite box constraints with a nonempty interior.
struct BoxBounds {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  BoxBounds(Eigen::VectorXd lo, Eigen::VectorXd hi);
  static BoxBounds cube(Eigen::Index dim, double lo, double hi);
  static BoxBounds unit(Eigen::Index dim) { return cube(dim, 0.0, 1.0); }

  Eigen::Index dim() const { return lower.size(); }
  Eigen::VectorXd clamp(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  bool contains(const Eigen::Ref<const Eigen::VectorXd>& x, double slack = 0.0) const;
};

struct OptimResult {
  Eigen::VectorXd x_opt;
  double f_opt = 0.0;
  int iterations = 0;
  bool converged = false;
  /// Set when a constrained search found no feasible candidate and fell back
  /// to a caller-provided anchor.
  bool fallback = false;
  /// Accepted objective values in minimizer convention (non-increasing).
  std::vector<double> trace;
};

/// Objective returning f(x) and filling grad (grad.size() == x.size()).
using GradObjective = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>;
/// Value-only objective.
using Objective = std::function<double(const Eigen::VectorXd&)>;

struct MinimizeOptions {
  double tol = 1e-6;  // infinity norm of the projected gradient
  int max_iter = 200;
  int memory = 10;
};

/// Limited-memory quasi-Newton minimization over a box: two-loop recursion on
/// the free variables, strong-Wolfe line search on interior segments and
/// Armijo backtracking when the step is capped by a bound. Non-finite
/// objective or gradient values abort with the best previous iterate.
OptimResult minimize_box(const GradObjective& f, const Eigen::VectorXd& x0, const BoxBounds& bounds,
                         const MinimizeOptions& opts = {});

struct MultistartOptions {
  int n_random = 5000;
  int n_top = 100;
  MinimizeOptions local;
  double fd_step = 1e-6;  // central-difference step for gradient-free objectives
};

/// Wraps a value-only objective with central-difference gradients, shrinking
/// steps at the box boundary so probes stay feasible.
GradObjective with_fd_gradient(const Objective& f, const BoxBounds& bounds, double step);

/// Seeded random search (n_random uniform samples plus optional extra
/// candidate starts) followed by local refinement of the n_top best. The
/// result is never worse than the best sampled value; ties between local runs
/// resolve to the lowest start index.
OptimResult multistart_maximize(const Objective& f, const BoxBounds& bounds,
                                const MultistartOptions& opts, std::uint64_t seed,
                                const std::vector<Eigen::VectorXd>& extra_starts = {});

/// Maximizes f subject to g(x) >= 0 via an exterior quadratic-penalty
/// sequence (mu_k = 10^k * f-scale, k = 0..4) with feasibility filtering and
/// a Newton polish onto the g = 0 boundary. Returns the best feasible
/// candidate encountered (g >= -1e-8). When nothing feasible is found, falls
/// back to the best extra start and sets OptimResult::fallback.
OptimResult maximize_constrained(const Objective& f, const Objective& g, const BoxBounds& bounds,
                                 const MultistartOptions& opts, std::uint64_t seed,
                                 const std::vector<Eigen::VectorXd>& extra_starts = {});

}  // namespace featbo
