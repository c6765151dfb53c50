#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "featbo/common.hpp"
#include "featbo/encoder.hpp"
#include "featbo/kernels.hpp"
#include "featbo/loss.hpp"
#include "featbo/math.hpp"
#include "featbo/surrogate.hpp"
#include "test_helpers.hpp"

using namespace featbo;
using namespace featbo::testing;

namespace {

// Straightforward two-loop forward pass, the independent oracle for encode.
Eigen::VectorXd naive_forward(const FeatureMapParams& p, const Eigen::VectorXd& x) {
  Eigen::VectorXd h(p.hidden_dim());
  for (Eigen::Index i = 0; i < p.hidden_dim(); ++i) {
    double a = p.b1[i];
    for (Eigen::Index j = 0; j < p.input_dim(); ++j) a += p.W1(i, j) * x[j];
    h[i] = 1.0 / (1.0 + std::exp(-a));
  }
  Eigen::VectorXd z(p.feature_dim());
  for (Eigen::Index i = 0; i < p.feature_dim(); ++i) {
    double a = p.b2[i];
    for (Eigen::Index j = 0; j < p.hidden_dim(); ++j) a += p.W2(i, j) * h[j];
    z[i] = 1.0 / (1.0 + std::exp(-a));
  }
  return z;
}

FeatureMapParams zero_params(int D, int H, int d) {
  FeatureMapParams p;
  p.W1 = Eigen::MatrixXd::Zero(H, D);
  p.b1 = Eigen::VectorXd::Zero(H);
  p.W2 = Eigen::MatrixXd::Zero(d, H);
  p.b2 = Eigen::VectorXd::Zero(d);
  return p;
}

// ||params||^2 / 2, the trivial quadratic loss.
class QuadLoss final : public DifferentiableLoss {
 public:
  explicit QuadLoss(Eigen::Index n) : n_(n) {}
  Eigen::Index dim() const override { return n_; }
  double value(const Eigen::Ref<const Eigen::VectorXd>& p) const override {
    return 0.5 * p.squaredNorm();
  }
  double value_and_gradient(const Eigen::Ref<const Eigen::VectorXd>& p,
                            Eigen::Ref<Eigen::VectorXd> g) const override {
    g = p;
    return value(p);
  }

 private:
  Eigen::Index n_;
};

class ConstLoss final : public DifferentiableLoss {
 public:
  explicit ConstLoss(Eigen::Index n) : n_(n) {}
  Eigen::Index dim() const override { return n_; }
  double value(const Eigen::Ref<const Eigen::VectorXd>&) const override { return 4.2; }
  double value_and_gradient(const Eigen::Ref<const Eigen::VectorXd>&,
                            Eigen::Ref<Eigen::VectorXd> g) const override {
    g.setZero();
    return 4.2;
  }

 private:
  Eigen::Index n_;
};

class NanLoss final : public DifferentiableLoss {
 public:
  Eigen::Index dim() const override { return 2; }
  double value(const Eigen::Ref<const Eigen::VectorXd>&) const override {
    return std::numeric_limits<double>::quiet_NaN();
  }
  double value_and_gradient(const Eigen::Ref<const Eigen::VectorXd>&,
                            Eigen::Ref<Eigen::VectorXd> g) const override {
    g.setZero();
    return std::numeric_limits<double>::quiet_NaN();
  }
};

}  // namespace

TEST_SUITE_BEGIN("encoder_kernels");

TEST_CASE("encode with all-zero parameters returns 0.5 everywhere") {
  const FeatureMapParams p = zero_params(4, 20, 2);
  Rng rng(3);
  const Eigen::MatrixXd X = random_unit_rows(5, 4, rng);
  const Eigen::MatrixXd Z = encode(p, X);
  CHECK((Z.array() - 0.5).abs().maxCoeff() < 1e-15);
}

TEST_CASE("encode saturates toward 1 for a large output bias") {
  FeatureMapParams p = zero_params(3, 20, 2);
  p.b2.setConstant(50.0);
  Rng rng(5);
  const Eigen::MatrixXd Z = encode(p, random_unit_rows(4, 3, rng));
  CHECK((1.0 - Z.array()).maxCoeff() < 1e-10);
  CHECK((Z.array() < 1.0).all());  // strictly inside the open cube
}

TEST_CASE("encode matches the naive two-loop oracle") {
  Rng rng(7);
  FeatureMapParams p = FeatureMapParams::init(6, 20, 3, rng);
  for (Eigen::Index i = 0; i < p.b1.size(); ++i) p.b1[i] = rng.normal() * 0.3;
  for (Eigen::Index i = 0; i < p.b2.size(); ++i) p.b2[i] = rng.normal() * 0.3;
  const Eigen::MatrixXd X = random_unit_rows(8, 6, rng);
  const Eigen::MatrixXd Z = encode(p, X);
  for (Eigen::Index r = 0; r < X.rows(); ++r) {
    const Eigen::VectorXd want = naive_forward(p, X.row(r));
    CHECK((Z.row(r).transpose() - want).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("encode maps any finite input strictly inside (0,1)") {
  Rng rng(9);
  FeatureMapParams p = FeatureMapParams::init(3, 20, 2, rng);
  Eigen::MatrixXd X(3, 3);
  X << 0, 0, 0, 1, 1, 1, 0.5, 0.25, 0.75;
  const Eigen::MatrixXd Z = encode(p, X);
  CHECK((Z.array() > 0.0).all());
  CHECK((Z.array() < 1.0).all());
}

TEST_CASE("flatten and unflatten round trip") {
  Rng rng(11);
  const FeatureMapParams p = FeatureMapParams::init(5, 20, 2, rng);
  const Eigen::VectorXd v = p.flatten();
  const FeatureMapParams q = FeatureMapParams::unflatten(v, 5, 20, 2);
  CHECK((q.flatten() - v).cwiseAbs().maxCoeff() == 0.0);
  CHECK((q.W1 - p.W1).cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(FeatureMapParams::unflatten(v.head(10), 5, 20, 2), std::invalid_argument);
}

TEST_CASE("kernel at zero distance equals the signal variance") {
  KernelParams kp = KernelParams::defaults(3);
  kp.log_signal_variance = std::log(2.5);
  Eigen::MatrixXd Z(1, 3);
  Z << 0.2, 0.4, 0.8;
  const Eigen::MatrixXd K = kernel_matrix(kp, Z, Z);
  CHECK(K(0, 0) == doctest::Approx(2.5).epsilon(1e-12));
}

TEST_CASE("squared exponential closed form at unit distance") {
  KernelParams kp = KernelParams::defaults(2, KernelKind::SquaredExponential);
  Eigen::MatrixXd Z(2, 2);
  Z << 0, 0, 1, 0;
  const Eigen::MatrixXd K = kernel_matrix(kp, Z, Z);
  CHECK(K(0, 1) == doctest::Approx(std::exp(-0.5)).epsilon(1e-12));
  CHECK(K(0, 1) == doctest::Approx(0.606531).epsilon(1e-6));
}

TEST_CASE("Matern 5/2 closed form at unit distance") {
  KernelParams kp = KernelParams::defaults(2, KernelKind::Matern52);
  Eigen::MatrixXd Z(2, 2);
  Z << 0, 0, 0, 1;
  const double s5 = std::sqrt(5.0);
  const double want = (1.0 + s5 + 5.0 / 3.0) * std::exp(-s5);
  const Eigen::MatrixXd K = kernel_matrix(kp, Z, Z);
  CHECK(K(1, 0) == doctest::Approx(want).epsilon(1e-12));
  CHECK(K(1, 0) == doctest::Approx(0.523994).epsilon(1e-6));
}

TEST_CASE("kernel is stationary: a common shift leaves values unchanged") {
  Rng rng(13);
  KernelParams kp = KernelParams::defaults(3);
  kp.log_lengthscales << 0.1, -0.4, 0.3;
  const Eigen::MatrixXd Z = random_matrix(6, 3, rng);
  const Eigen::RowVector3d shift(0.7, -1.2, 0.4);
  const Eigen::MatrixXd K1 = kernel_matrix(kp, Z, Z);
  const Eigen::MatrixXd K2 = kernel_matrix(kp, Z.rowwise() + shift, Z.rowwise() + shift);
  CHECK((K1 - K2).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("kernel matrix plus jitter is positive definite") {
  Rng rng(17);
  for (KernelKind kind : {KernelKind::Matern52, KernelKind::SquaredExponential}) {
    KernelParams kp = KernelParams::defaults(2, kind);
    const Eigen::MatrixXd Z = random_unit_rows(25, 2, rng);
    Eigen::MatrixXd K = kernel_matrix(kp, Z, Z);
    K.diagonal().array() += 1e-8;
    Eigen::LLT<Eigen::MatrixXd> llt(K);
    CHECK(llt.info() == Eigen::Success);
  }
}

TEST_CASE("kernel_vector jacobian agrees with finite differences") {
  Rng rng(19);
  KernelParams kp = KernelParams::defaults(3);
  kp.log_lengthscales << -0.2, 0.1, 0.4;
  kp.log_signal_variance = 0.3;
  const Eigen::MatrixXd Z = random_unit_rows(7, 3, rng);
  Eigen::VectorXd z(3);
  z << 0.3, 0.6, 0.2;
  const Eigen::MatrixXd J = kernel_vector_jacobian(kp, Z, z);
  const double h = 1e-6;
  for (Eigen::Index j = 0; j < 3; ++j) {
    Eigen::VectorXd zp = z, zm = z;
    zp[j] += h;
    zm[j] -= h;
    const Eigen::VectorXd fd = (kernel_vector(kp, Z, zp) - kernel_vector(kp, Z, zm)) / (2 * h);
    CHECK((J.col(j) - fd).cwiseAbs().maxCoeff() < 1e-7);
  }
}

TEST_CASE("loss_gradient: constant loss has zero gradient") {
  const ConstLoss loss(5);
  const Eigen::VectorXd g = loss_gradient(loss, Eigen::VectorXd::Ones(5));
  CHECK(g.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("loss_gradient: quadratic loss gradient equals the parameters") {
  Rng rng(23);
  const QuadLoss loss(6);
  const Eigen::VectorXd p = random_vector(6, rng);
  CHECK((loss_gradient(loss, p) - p).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("loss_gradient signals dimension and non-finite errors distinctly") {
  const QuadLoss loss(4);
  CHECK_THROWS_AS(loss_gradient(loss, Eigen::VectorXd::Ones(3)), std::invalid_argument);
  const NanLoss bad;
  CHECK_THROWS_AS(loss_gradient(bad, Eigen::VectorXd::Ones(2)), NumericalError);
}

TEST_CASE("joint objective gradient matches finite differences on a small instance") {
  Rng rng(29);
  const Eigen::MatrixXd X = random_unit_rows(8, 6, rng);
  Eigen::VectorXd y(8);
  for (int i = 0; i < 8; ++i) y[i] = rng.normal();

  DecoderStructure structure;  // full ICM, P = D
  ModelOptions opts;
  opts.hidden_dim = 7;
  // moderate noise keeps the objective scale small enough that the 1e-5
  // central-difference oracle resolves the 1e-4 relative tolerance
  opts.noise_variance = 0.05;
  const JointObjective obj(X, y, 2, structure, opts);
  Rng init_rng(31);
  Eigen::VectorXd params = obj.initial_params(init_rng);
  // move off the symmetric initialization so no gradient component is
  // accidentally zero
  for (Eigen::Index i = 0; i < params.size(); ++i) params[i] += 0.05 * init_rng.normal();

  const Eigen::VectorXd g = loss_gradient(obj, params);
  const auto value = [&obj](const Eigen::VectorXd& p) { return obj.value(p); };
  const auto& l = obj.layout();
  std::vector<Eigen::Index> coords = {0,
                                      l.encoder_size / 2,
                                      l.encoder_size - 1,
                                      l.response_kernel_offset(),
                                      l.response_kernel_offset() + l.kernel_size - 1,
                                      l.decoder_kernel_offset(0),
                                      l.decoder_kernel_offset(0) + l.kernel_size - 1,
                                      l.coreg_offset(0),
                                      l.coreg_offset(0) + 7,
                                      l.total - 1};
  for (const Eigen::Index i : coords) {
    const double fd = fd_gradient_coord(value, params, i);
    CAPTURE(i);
    CHECK(grad_close(g[i], fd));
  }
}

TEST_SUITE_END();
