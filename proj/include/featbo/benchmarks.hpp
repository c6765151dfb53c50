#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "featbo/rng.hpp"

namespace featbo {

/// Rosenbrock valley: sum 100 (z_{i+1} - z_i^2)^2 + (z_i - 1)^2; minimum 0 at
/// the all-ones point. Needs d >= 2.
double rosenbrock(const Eigen::Ref<const Eigen::VectorXd>& z);

/// 10 sin(z_1) * prod_i sin(z_i); sin(z_1) enters squared overall, so the
/// range is [-10, 10] with minimum -10.
double product_of_sines(const Eigen::Ref<const Eigen::VectorXd>& z);

/// Coulomb-style potential of n_p points on the unit sphere, parameterized by
/// unit-coded (azimuth, polar) pairs: x[2i] in [0,1] maps to [0, 2pi),
/// x[2i+1] to [0, pi]. Near-coincident points (distance < 1e-12) return the
/// finite cap 1e12 so surrogate targets stay finite.
double thomson_potential(const Eigen::Ref<const Eigen::VectorXd>& coded_angles);

/// Seeded d x D matrix with orthonormal rows (R R^T = I_d). Requires d <= D.
Eigen::MatrixXd make_orthogonal_embedding(int d, int D, std::uint64_t seed);

enum class IntrinsicKind { Rosenbrock, ProductOfSines, ThomsonSpherical };
enum class EmbeddingKind { Identity, LinearOrthogonal, SigmoidOfLinear };

/// An intrinsic low-dimensional test function lifted into [0,1]^D. The box is
/// first mapped affinely to [-c, c]^D (c = 2 sqrt(d), wide enough that every
/// registered intrinsic optimum stays reachable), then pushed through the
/// embedding: z = u (Identity), z = R u (LinearOrthogonal), or
/// z = pi (2 sigmoid(R u) - 1) (SigmoidOfLinear, stretching the (0,1) sigmoid
/// output to the sine landscape's period). Thomson uses its own [0,1] angle
/// coding and skips the affine map.
class EmbeddedObjective {
 public:
  static EmbeddedObjective rosenbrock_linear(int d, int D, std::uint64_t embed_seed);
  static EmbeddedObjective sines_linear(int d, int D, std::uint64_t embed_seed);
  static EmbeddedObjective sines_sigmoid(int d, int D, std::uint64_t embed_seed);
  static EmbeddedObjective sines_identity(int d);
  static EmbeddedObjective thomson(int n_p);

  int dim() const { return D_; }
  int intrinsic_dim() const { return d_; }
  IntrinsicKind intrinsic() const { return intrinsic_; }
  EmbeddingKind embedding() const { return embedding_; }
  double domain_scale() const { return scale_; }
  const Eigen::MatrixXd& embedding_matrix() const { return R_; }
  std::optional<double> f_min() const { return f_min_; }
  double noise_variance() const { return noise_variance_; }
  void set_noise_variance(double v) { noise_variance_ = v; }

  /// Intrinsic coordinates of a point in the box.
  Eigen::VectorXd intrinsic_point(const Eigen::Ref<const Eigen::VectorXd>& x) const;

  /// Noiseless objective value; rejects points outside [0,1]^D.
  double f_true(const Eigen::Ref<const Eigen::VectorXd>& x) const;

  /// (y_noisy, f_true) with y = f + N(0, noise_variance) drawn from rng.
  std::pair<double, double> evaluate(const Eigen::Ref<const Eigen::VectorXd>& x, Rng& rng) const;

  /// Right inverse of the embedding: a box point whose intrinsic coordinates
  /// equal z (exact for ||z|| within reach; see domain_scale). For Thomson the
  /// coding is the identity.
  Eigen::VectorXd preimage(const Eigen::Ref<const Eigen::VectorXd>& z) const;

 private:
  EmbeddedObjective() = default;

  IntrinsicKind intrinsic_ = IntrinsicKind::Rosenbrock;
  EmbeddingKind embedding_ = EmbeddingKind::Identity;
  int d_ = 0;
  int D_ = 0;
  double scale_ = 1.0;
  Eigen::MatrixXd R_;  // d x D for the linear families
  std::optional<double> f_min_;
  double noise_variance_ = 1e-4;
};

struct BenchmarkInfo {
  std::string name;
  std::string description;
  int default_feature_dim = 2;
  EmbeddedObjective objective;
};

/// Named benchmark configurations addressable from the CLI.
const std::vector<BenchmarkInfo>& benchmark_registry();
const BenchmarkInfo* find_benchmark(const std::string& name);

}  // namespace featbo
