#pragma once

#include <Eigen/Dense>
#include <vector>

#include "featbo/rng.hpp"

namespace featbo::testing {

/// Dense Kronecker product straight from the definition; the independent
/// oracle for every structured-algebra check.
inline Eigen::MatrixXd dense_kron(const std::vector<Eigen::MatrixXd>& factors) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Ones(1, 1);
  for (const auto& f : factors) {
    Eigen::MatrixXd next(out.rows() * f.rows(), out.cols() * f.cols());
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
      for (Eigen::Index j = 0; j < out.cols(); ++j) {
        next.block(i * f.rows(), j * f.cols(), f.rows(), f.cols()) = out(i, j) * f;
      }
    }
    out = std::move(next);
  }
  return out;
}

inline Eigen::MatrixXd random_spd(Eigen::Index n, Rng& rng, double diag_boost = 0.5) {
  Eigen::MatrixXd A(n, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < n; ++i) A(i, j) = rng.normal();
  Eigen::MatrixXd S = A * A.transpose() / static_cast<double>(n);
  S.diagonal().array() += diag_boost;
  return S;
}

inline Eigen::VectorXd random_vector(Eigen::Index n, Rng& rng) {
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = rng.normal();
  return v;
}

inline Eigen::MatrixXd random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng) {
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index j = 0; j < c; ++j)
    for (Eigen::Index i = 0; i < r; ++i) m(i, j) = rng.normal();
  return m;
}

inline Eigen::MatrixXd random_unit_rows(Eigen::Index r, Eigen::Index c, Rng& rng) {
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index j = 0; j < c; ++j)
    for (Eigen::Index i = 0; i < r; ++i) m(i, j) = rng.uniform01();
  return m;
}

/// Central-difference oracle for gradient checks, independent of any
/// analytic-gradient code path.
template <typename F>
double fd_gradient_coord(const F& value, const Eigen::VectorXd& params, Eigen::Index i,
                         double step = 1e-5) {
  Eigen::VectorXd p = params;
  p[i] = params[i] + step;
  const double fp = value(p);
  p[i] = params[i] - step;
  const double fm = value(p);
  return (fp - fm) / (2.0 * step);
}

/// Relative agreement with an absolute floor so near-zero entries compare
/// absolutely at tol * floor.
inline bool grad_close(double analytic, double fd, double tol = 1e-4, double floor = 1e-3) {
  return std::abs(analytic - fd) <= tol * std::max({floor, std::abs(analytic), std::abs(fd)});
}

}  // namespace featbo::testing
