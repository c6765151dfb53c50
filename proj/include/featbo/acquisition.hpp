#pragma once

#include <Eigen/Dense>
#include <cstdint>

#include "featbo/numopt.hpp"
#include "featbo/surrogate.hpp"

namespace featbo {

enum class AcquisitionKind { PI, EI, UCB };

/// Acquisition choice with its scalars. y_min is the best noisy observation
/// so far (the improvement reference for PI/EI); beta trades exploration for
/// exploitation in UCB.
struct AcquisitionSpec {
  AcquisitionKind kind = AcquisitionKind::EI;
  double beta = 1.7320508075688772;  // sqrt(3)
  double y_min = 0.0;
};

/// PI / EI / UCB at posterior (mu, sigma), minimization convention:
///   Z = (y_min - mu) / sigma
///   PI = Phi(Z), EI = sigma (Z Phi(Z) + phi(Z)), UCB = -mu + beta sigma.
/// sigma = 0 takes the deterministic limits.
double acq_value(const AcquisitionSpec& spec, double mu, double sigma);

struct LipschitzOptions {
  MultistartOptions search = {2000, 20, MinimizeOptions{1e-6, 40, 10}, 1e-6};
  double floor = 1e-6;
  int max_anchor_starts = 16;  // embedded-data starts added to the search
};

/// Lipschitz constant of the decoder posterior mean over the feature box:
/// the largest row 2-norm of the D x d Jacobian, located by multistart with
/// the analytic Jacobian, floored at options.floor. The row 2-norm (rather
/// than the largest single entry) is the tightest constant that bounds
/// |mu_i(z) - mu_i(z')| by L ||z - z'||_2 along every direction.
double estimate_lipschitz(const JointSurrogate& s, const BoxBounds& feature_box,
                          std::uint64_t seed, const LipschitzOptions& options = {});

/// Feasibility data for the distance constraint: embedded training set, the
/// Lipschitz constant, and the per-row decoder-mean peaks mu_max, cached so a
/// constraint evaluation needs only a nearest-neighbour scan.
class ConstraintState {
 public:
  ConstraintState(const JointSurrogate& s, double lipschitz);
  /// Assembles the state from raw pieces (synthetic constraint setups).
  ConstraintState(Eigen::MatrixXd embedded_points, Eigen::VectorXd mu_max_per_point,
                  double lipschitz);

  const Eigen::MatrixXd& embedded_points() const { return Z_t_; }
  double lipschitz() const { return L_; }
  double mu_max(Eigen::Index row) const { return mu_max_[row]; }

 private:
  Eigen::MatrixXd Z_t_;
  Eigen::VectorXd mu_max_;
  double L_;
};

/// mu_max(z*)/L - dist(z, Z_t) where z* is the nearest embedded training
/// point; nonnegative values are feasible.
double constraint_value(const Eigen::Ref<const Eigen::VectorXd>& z, const ConstraintState& cs);

struct ProposeOptions {
  MultistartOptions search = {5000, 100, MinimizeOptions{1e-6, 60, 10}, 1e-6};
  LipschitzOptions lipschitz;
  int max_anchor_starts = 10;  // embedded-data anchors for the constrained search
};

struct Proposal {
  Eigen::VectorXd z_star;
  double acquisition = 0.0;
  bool fallback = false;
  // populated only for constrained proposals
  double lipschitz = 0.0;
  double constraint = 0.0;
};

/// Maximizes the acquisition of the response posterior over the feature box,
/// optionally under the Lipschitz feasibility constraint.
Proposal propose(const JointSurrogate& s, const AcquisitionSpec& spec, bool constrained,
                 std::uint64_t seed, const ProposeOptions& options = {});

}  // namespace featbo
