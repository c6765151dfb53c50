#pragma once

#include <Eigen/Dense>
#include <vector>

namespace featbo::kron {

/// A covariance matrix represented as a Kronecker product of W small square
/// factors. The full matrix (side N_V = prod of factor sides) is never
/// materialized. Factors are symmetrized (K + K^T)/2 on construction; input
/// asymmetry beyond tolerance is rejected since downstream eigendecomposition
/// assumes symmetry.
class KronFactors {
 public:
  explicit KronFactors(std::vector<Eigen::MatrixXd> factors);

  const std::vector<Eigen::MatrixXd>& factors() const { return factors_; }
  std::size_t count() const { return factors_.size(); }
  Eigen::Index full_side() const { return full_side_; }

 private:
  std::vector<Eigen::MatrixXd> factors_;
  Eigen::Index full_side_ = 1;
};

/// Factorwise spectral decomposition of a KronFactors: orthogonal Q_l and
/// eigenvalues L_l per factor, with eigenvalues clipped below at zero so that
/// near-singular kernels cannot inject negative round-off eigenvalues.
struct KronEig {
  std::vector<Eigen::MatrixXd> eigvec_factors;
  std::vector<Eigen::VectorXd> eigval_factors;

  Eigen::Index full_side() const;
};

/// Kronecker-structured covariance plus spherical noise; noise_variance > 0
/// is enforced so the noisy matrix is always invertible.
class NoisyKron {
 public:
  NoisyKron(KronEig eig, double noise_variance);

  const KronEig& eig() const { return eig_; }
  double noise_variance() const { return noise_variance_; }

 private:
  KronEig eig_;
  double noise_variance_;
};

/// (K_1 kron ... kron K_W) x as a sequence of reshaped matrix products.
/// Peak auxiliary storage is O(N_V); the Kronecker product itself is never
/// formed. Factor 1 is the most significant index block, matching the
/// conventional Kronecker-product layout.
Eigen::VectorXd matvec(const KronFactors& factors, const Eigen::Ref<const Eigen::VectorXd>& x);

/// Per-factor eigendecomposition, cost sum of G_l^3.
KronEig eig(const KronFactors& factors);

/// (kron K_l + s2 I)^{-1} x via Q (Lambda + s2 I)^{-1} Q^T x.
Eigen::VectorXd solve_noisy(const NoisyKron& nk, const Eigen::Ref<const Eigen::VectorXd>& x);

/// log det(kron K_l + s2 I) = sum_i log(lambda_i + s2), with lambda_i streamed
/// as running products of factor eigenvalues.
double logdet_noisy(const NoisyKron& nk);

/// x^T (kron K_l + s2 I)^{-1} x. Always >= 0.
double quadform(const NoisyKron& nk, const Eigen::Ref<const Eigen::VectorXd>& x);

}  // namespace featbo::kron
