#include "featbo/kernels.hpp"

#include <cmath>
#include <stdexcept>

namespace featbo {

namespace {

constexpr double kSqrt5 = 2.23606797749979;

void check_dims(const KernelParams& kp, Eigen::Index cols, const char* op) {
  if (cols != kp.feature_dim()) {
    throw std::invalid_argument(std::string(op) + ": input has " + std::to_string(cols) +
                                " columns but kernel has " + std::to_string(kp.feature_dim()) +
                                " lengthscales");
  }
}

double kernel_of_r2(KernelKind kind, double s2, double r2) {
  if (kind == KernelKind::SquaredExponential) {
    return s2 * std::exp(-0.5 * r2);
  }
  const double t = kSqrt5 * std::sqrt(r2);
  return s2 * (1.0 + t + t * t / 3.0) * std::exp(-t);
}

// d k / d r^2, smooth in r^2 for both kernels (no 1/r singularity).
double dkernel_dr2(KernelKind kind, double s2, double r2) {
  if (kind == KernelKind::SquaredExponential) {
    return -0.5 * s2 * std::exp(-0.5 * r2);
  }
  const double t = kSqrt5 * std::sqrt(r2);
  return -(5.0 / 6.0) * s2 * (1.0 + t) * std::exp(-t);
}

}  // namespace

Eigen::VectorXd KernelParams::flatten() const {
  Eigen::VectorXd v(param_count());
  v.head(log_lengthscales.size()) = log_lengthscales;
  v[v.size() - 1] = log_signal_variance;
  return v;
}

KernelParams KernelParams::unflatten(const Eigen::Ref<const Eigen::VectorXd>& v, KernelKind kind) {
  if (v.size() < 2) {
    throw std::invalid_argument("KernelParams::unflatten: need at least one lengthscale plus variance");
  }
  KernelParams kp;
  kp.kind = kind;
  kp.log_lengthscales = v.head(v.size() - 1);
  kp.log_signal_variance = v[v.size() - 1];
  return kp;
}

KernelParams KernelParams::defaults(Eigen::Index feature_dim, KernelKind kind) {
  KernelParams kp;
  kp.kind = kind;
  kp.log_lengthscales = Eigen::VectorXd::Zero(feature_dim);
  kp.log_signal_variance = 0.0;
  return kp;
}

Eigen::MatrixXd kernel_matrix(const KernelParams& kp, const Eigen::Ref<const Eigen::MatrixXd>& Z,
                              const Eigen::Ref<const Eigen::MatrixXd>& Z2) {
  check_dims(kp, Z.cols(), "kernel_matrix");
  check_dims(kp, Z2.cols(), "kernel_matrix");
  const Eigen::VectorXd inv_ls2 = (-2.0 * kp.log_lengthscales).array().exp();
  const double s2 = kp.signal_variance();

  const Eigen::MatrixXd Zs = Z * inv_ls2.cwiseSqrt().asDiagonal();
  const Eigen::MatrixXd Z2s = Z2 * inv_ls2.cwiseSqrt().asDiagonal();
  const Eigen::VectorXd n1 = Zs.rowwise().squaredNorm();
  const Eigen::VectorXd n2 = Z2s.rowwise().squaredNorm();
  Eigen::MatrixXd r2 = -2.0 * Zs * Z2s.transpose();
  r2.colwise() += n1;
  r2.rowwise() += n2.transpose();
  r2 = r2.cwiseMax(0.0);  // guard round-off below zero

  return r2.unaryExpr([&](double v) { return kernel_of_r2(kp.kind, s2, v); });
}

Eigen::VectorXd kernel_vector(const KernelParams& kp, const Eigen::Ref<const Eigen::MatrixXd>& Z,
                              const Eigen::Ref<const Eigen::VectorXd>& z) {
  check_dims(kp, Z.cols(), "kernel_vector");
  check_dims(kp, z.size(), "kernel_vector");
  const Eigen::VectorXd inv_ls2 = (-2.0 * kp.log_lengthscales).array().exp();
  const double s2 = kp.signal_variance();
  Eigen::VectorXd out(Z.rows());
  for (Eigen::Index n = 0; n < Z.rows(); ++n) {
    const double r2 = ((Z.row(n).transpose() - z).array().square() * inv_ls2.array()).sum();
    out[n] = kernel_of_r2(kp.kind, s2, r2);
  }
  return out;
}

Eigen::MatrixXd kernel_vector_jacobian(const KernelParams& kp,
                                       const Eigen::Ref<const Eigen::MatrixXd>& Z,
                                       const Eigen::Ref<const Eigen::VectorXd>& z) {
  check_dims(kp, Z.cols(), "kernel_vector_jacobian");
  check_dims(kp, z.size(), "kernel_vector_jacobian");
  const Eigen::VectorXd inv_ls2 = (-2.0 * kp.log_lengthscales).array().exp();
  const double s2 = kp.signal_variance();
  Eigen::MatrixXd J(Z.rows(), Z.cols());
  for (Eigen::Index n = 0; n < Z.rows(); ++n) {
    const Eigen::VectorXd diff = z - Z.row(n).transpose();
    const double r2 = (diff.array().square() * inv_ls2.array()).sum();
    const double g = dkernel_dr2(kp.kind, s2, r2);
    // d r^2 / d z_j = 2 (z_j - Z_nj) / l_j^2
    J.row(n) = (2.0 * g) * (diff.array() * inv_ls2.array()).transpose();
  }
  return J;
}

KernelContraction kernel_gradient_contraction(const KernelParams& kp,
                                              const Eigen::Ref<const Eigen::MatrixXd>& Z,
                                              const Eigen::Ref<const Eigen::MatrixXd>& S) {
  check_dims(kp, Z.cols(), "kernel_gradient_contraction");
  if (S.rows() != Z.rows() || S.cols() != Z.rows()) {
    throw std::invalid_argument("kernel_gradient_contraction: adjoint must be N x N");
  }
  const Eigen::Index n = Z.rows();
  const Eigen::Index d = Z.cols();
  const Eigen::VectorXd inv_ls2 = (-2.0 * kp.log_lengthscales).array().exp();
  const double s2 = kp.signal_variance();

  KernelContraction out;
  out.d_log_lengthscales = Eigen::VectorXd::Zero(d);
  out.dZ = Eigen::MatrixXd::Zero(n, d);

  for (Eigen::Index a = 0; a < n; ++a) {
    for (Eigen::Index b = 0; b < n; ++b) {
      const double w = S(a, b);
      const double wsym = S(a, b) + S(b, a);
      if (w == 0.0 && wsym == 0.0) continue;
      double r2 = 0.0;
      for (Eigen::Index j = 0; j < d; ++j) {
        const double diff = Z(a, j) - Z(b, j);
        r2 += diff * diff * inv_ls2[j];
      }
      const double k = kernel_of_r2(kp.kind, s2, r2);
      const double g = dkernel_dr2(kp.kind, s2, r2);
      out.d_log_signal_variance += w * k;  // k scales linearly with s^2
      for (Eigen::Index j = 0; j < d; ++j) {
        const double diff = Z(a, j) - Z(b, j);
        out.d_log_lengthscales[j] += w * g * (-2.0 * diff * diff * inv_ls2[j]);
        out.dZ(a, j) += wsym * g * 2.0 * diff * inv_ls2[j];
      }
    }
  }
  return out;
}

}  // namespace featbo
