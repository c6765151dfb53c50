#pragma once

#include <Eigen/Dense>

namespace featbo {

enum class KernelKind { Matern52, SquaredExponential };

/// Stationary kernel with ARD lengthscales, hyperparameters kept in log space
/// so positivity never needs explicit constraints.
struct KernelParams {
  KernelKind kind = KernelKind::Matern52;
  Eigen::VectorXd log_lengthscales;
  double log_signal_variance = 0.0;

  Eigen::Index feature_dim() const { return log_lengthscales.size(); }
  double signal_variance() const { return std::exp(log_signal_variance); }
  Eigen::VectorXd lengthscales() const { return log_lengthscales.array().exp(); }

  Eigen::Index param_count() const { return log_lengthscales.size() + 1; }
  Eigen::VectorXd flatten() const;
  static KernelParams unflatten(const Eigen::Ref<const Eigen::VectorXd>& v, KernelKind kind);

  static KernelParams defaults(Eigen::Index feature_dim,
                               KernelKind kind = KernelKind::Matern52);
};

/// N x M cross-covariance matrix k(Z, Z2).
Eigen::MatrixXd kernel_matrix(const KernelParams& kp, const Eigen::Ref<const Eigen::MatrixXd>& Z,
                              const Eigen::Ref<const Eigen::MatrixXd>& Z2);

/// k(Z, z) as an N-vector.
Eigen::VectorXd kernel_vector(const KernelParams& kp, const Eigen::Ref<const Eigen::MatrixXd>& Z,
                              const Eigen::Ref<const Eigen::VectorXd>& z);

/// Jacobian of kernel_vector with respect to the query point: entry (n, j) is
/// d k(z, Z[n]) / d z_j.
Eigen::MatrixXd kernel_vector_jacobian(const KernelParams& kp,
                                       const Eigen::Ref<const Eigen::MatrixXd>& Z,
                                       const Eigen::Ref<const Eigen::VectorXd>& z);

/// Reverse-mode contraction for training: given the adjoint S = dL/dK of the
/// symmetric kernel matrix K(Z, Z), accumulates dL with respect to the log
/// hyperparameters and the inputs Z.
struct KernelContraction {
  Eigen::VectorXd d_log_lengthscales;
  double d_log_signal_variance = 0.0;
  Eigen::MatrixXd dZ;
};
KernelContraction kernel_gradient_contraction(const KernelParams& kp,
                                              const Eigen::Ref<const Eigen::MatrixXd>& Z,
                                              const Eigen::Ref<const Eigen::MatrixXd>& S);

}  // namespace featbo
