#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "featbo/acquisition.hpp"
#include "featbo/math.hpp"
#include "featbo/surrogate.hpp"
#include "test_helpers.hpp"

using namespace featbo;
using namespace featbo::testing;

namespace {

AcquisitionSpec spec_of(AcquisitionKind kind, double y_min, double beta = 1.7320508075688772) {
  AcquisitionSpec s;
  s.kind = kind;
  s.beta = beta;
  s.y_min = y_min;
  return s;
}

// One-training-point surrogate in d = 2; with a single observation the
// standardized target is zero, so the posterior mean is the prior everywhere
// and UCB reduces to beta * sigma.
JointSurrogate one_point_surrogate() {
  Eigen::MatrixXd X(1, 3);
  X << 0.2, 0.8, 0.5;
  Eigen::VectorXd y(1);
  y << 1.3;
  ModelOptions opts;
  opts.hidden_dim = 4;
  const JointObjective probe(Eigen::MatrixXd::Constant(2, 3, 0.5), Eigen::VectorXd::Zero(2), 2,
                             DecoderStructure{}, opts);
  Rng init(5);
  Eigen::VectorXd params = probe.initial_params(init);
  const auto& l = probe.layout();
  params.segment(l.encoder_offset(), l.encoder_size) *= 8.0;  // spread the feature map
  params.segment(l.response_kernel_offset(), l.kernel_size - 1).setConstant(std::log(0.25));
  return JointSurrogate(params, X, y, 2, DecoderStructure{}, opts);
}

JointSurrogate small_fitted_surrogate(std::uint64_t seed) {
  Rng rng(seed);
  const Eigen::MatrixXd X = random_unit_rows(9, 4, rng);
  Eigen::VectorXd y(9);
  for (int i = 0; i < 9; ++i) y[i] = std::sin(5.0 * X(i, 0)) + 0.5 * X(i, 2) + 0.1 * rng.normal();
  ModelOptions opts;
  opts.hidden_dim = 4;
  FitConfig cfg;
  cfg.restarts = 2;
  cfg.optimizer.max_iter = 40;
  cfg.seed = seed;
  return fit(X, y, 2, DecoderStructure{}, opts, cfg);
}

}  // namespace

TEST_SUITE_BEGIN("acquisition");

TEST_CASE("closed forms at Z = 0") {
  CHECK(acq_value(spec_of(AcquisitionKind::PI, 0.7), 0.7, 1.0) == doctest::Approx(0.5));
  CHECK(acq_value(spec_of(AcquisitionKind::EI, 0.7), 0.7, 1.0) ==
        doctest::Approx(0.398942).epsilon(1e-6));
}

TEST_CASE("UCB closed form with the sqrt(3) weight") {
  CHECK(acq_value(spec_of(AcquisitionKind::UCB, 0.0), 1.0, 2.0) ==
        doctest::Approx(-1.0 + 2.0 * std::sqrt(3.0)).epsilon(1e-12));
  CHECK(acq_value(spec_of(AcquisitionKind::UCB, 0.0), 1.0, 2.0) ==
        doctest::Approx(2.464102).epsilon(1e-6));
}

TEST_CASE("EI at y_min = -1, mu = 0, sigma = 1") {
  const double want = -norm_cdf(-1.0) + norm_pdf(-1.0);
  CHECK(acq_value(spec_of(AcquisitionKind::EI, -1.0), 0.0, 1.0) ==
        doctest::Approx(want).epsilon(1e-12));
  CHECK(acq_value(spec_of(AcquisitionKind::EI, -1.0), 0.0, 1.0) ==
        doctest::Approx(0.083315).epsilon(1e-4));
}

TEST_CASE("deterministic limits at sigma = 0") {
  CHECK(acq_value(spec_of(AcquisitionKind::PI, 0.5), 0.4, 0.0) == 1.0);
  CHECK(acq_value(spec_of(AcquisitionKind::PI, 0.5), 0.6, 0.0) == 0.0);
  CHECK(acq_value(spec_of(AcquisitionKind::PI, 0.5), 0.5, 0.0) == 0.0);
  CHECK(acq_value(spec_of(AcquisitionKind::EI, 0.5), 0.1, 0.0) == doctest::Approx(0.4));
  CHECK(acq_value(spec_of(AcquisitionKind::EI, 0.5), 0.9, 0.0) == 0.0);
  CHECK(acq_value(spec_of(AcquisitionKind::UCB, 0.5), 0.7, 0.0) == doctest::Approx(-0.7));
}

TEST_CASE("EI and PI are continuous as sigma approaches zero") {
  for (double mu : {0.2, 0.5, 0.8}) {
    for (AcquisitionKind kind : {AcquisitionKind::PI, AcquisitionKind::EI}) {
      const AcquisitionSpec s = spec_of(kind, 0.5);
      if (mu == 0.5 && kind == AcquisitionKind::PI) continue;  // the jump point itself
      CHECK(std::abs(acq_value(s, mu, 1e-10) - acq_value(s, mu, 0.0)) < 1e-8);
    }
  }
}

TEST_CASE("EI nonnegative, PI in [0,1], UCB monotone") {
  const AcquisitionSpec ei = spec_of(AcquisitionKind::EI, 0.3);
  const AcquisitionSpec pi = spec_of(AcquisitionKind::PI, 0.3);
  const AcquisitionSpec ucb = spec_of(AcquisitionKind::UCB, 0.3);
  double prev_mu_val = 1e300;
  for (double mu = -2.0; mu <= 2.0; mu += 0.25) {
    for (double sigma = 0.0; sigma <= 2.0; sigma += 0.25) {
      CHECK(acq_value(ei, mu, sigma) >= 0.0);
      const double p = acq_value(pi, mu, sigma);
      CHECK(p >= 0.0);
      CHECK(p <= 1.0);
    }
    const double u = acq_value(ucb, mu, 1.0);
    CHECK(u < prev_mu_val);  // strictly decreasing in mu
    prev_mu_val = u;
  }
  double prev_sigma_val = -1e300;
  for (double sigma = 0.0; sigma <= 2.0; sigma += 0.25) {
    const double u = acq_value(ucb, 0.0, sigma);
    CHECK(u >= prev_sigma_val);  // nondecreasing in sigma
    prev_sigma_val = u;
  }
}

TEST_CASE("acq_value rejects invalid scalars") {
  CHECK_THROWS_AS(acq_value(spec_of(AcquisitionKind::UCB, 0.0, -1.0), 0.0, 1.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(acq_value(spec_of(AcquisitionKind::EI, 0.0), 0.0, -0.5), std::invalid_argument);
  CHECK_THROWS_AS(
      acq_value(spec_of(AcquisitionKind::EI, std::numeric_limits<double>::infinity()), 0.0, 1.0),
      std::invalid_argument);
}

TEST_CASE("constant decoder mean estimates the floor Lipschitz constant") {
  // all inputs at the box center warp to zero targets, so the decoder
  // posterior mean is identically zero
  Eigen::MatrixXd X = Eigen::MatrixXd::Constant(4, 3, 0.5);
  Eigen::VectorXd y(4);
  y << 0.1, 0.2, 0.3, 0.4;
  ModelOptions opts;
  opts.hidden_dim = 4;
  const JointObjective probe(X, y, 2, DecoderStructure{}, opts);
  Rng init(7);
  const JointSurrogate s(probe.initial_params(init), X, y, 2, DecoderStructure{}, opts);

  LipschitzOptions lo;
  lo.search.n_random = 200;
  lo.search.n_top = 5;
  const double L = estimate_lipschitz(s, BoxBounds::unit(2), 11, lo);
  CHECK(L == doctest::Approx(1e-6));
}

TEST_CASE("one-dimensional Lipschitz estimate matches a dense gradient scan") {
  // single training pair, one output, SE kernel
  Eigen::MatrixXd X(1, 1);
  X << 0.85;
  Eigen::VectorXd y(1);
  y << 0.4;
  ModelOptions opts;
  opts.hidden_dim = 3;
  opts.kernel = KernelKind::SquaredExponential;
  DecoderStructure structure;
  const JointObjective probe(Eigen::MatrixXd::Constant(2, 1, 0.5), Eigen::VectorXd::Zero(2), 1,
                             structure, opts);
  Rng init(13);
  Eigen::VectorXd params = probe.initial_params(init);
  const auto& l = probe.layout();
  params.segment(l.decoder_kernel_offset(0), l.kernel_size - 1).setConstant(std::log(0.2));
  const JointSurrogate s(params, X, y, 1, structure, opts);

  LipschitzOptions lo;
  lo.search.n_random = 500;
  lo.search.n_top = 10;
  const double L = estimate_lipschitz(s, BoxBounds::unit(1), 17, lo);

  double grid_max = 0.0;
  const int n = 10000;
  Eigen::VectorXd z(1);
  for (int i = 0; i + 1 < n; ++i) {
    z[0] = static_cast<double>(i) / (n - 1);
    const double m0 = s.decoder_posterior_mean(z)[0];
    z[0] = static_cast<double>(i + 1) / (n - 1);
    const double m1 = s.decoder_posterior_mean(z)[0];
    grid_max = std::max(grid_max, std::abs(m1 - m0) * (n - 1));
  }
  CHECK(L == doctest::Approx(grid_max).epsilon(0.02));
}

TEST_CASE("estimated constant validates on sampled pairs") {
  const JointSurrogate s = small_fitted_surrogate(23);
  LipschitzOptions lo;
  lo.search.n_random = 800;
  lo.search.n_top = 15;
  const double L = estimate_lipschitz(s, BoxBounds::unit(2), 29, lo);
  Rng rng(31);
  for (int rep = 0; rep < 100; ++rep) {
    Eigen::VectorXd a(2), b(2);
    a << rng.uniform01(), rng.uniform01();
    b << rng.uniform01(), rng.uniform01();
    const Eigen::VectorXd ma = s.decoder_posterior_mean(a);
    const Eigen::VectorXd mb = s.decoder_posterior_mean(b);
    const double bound = L * (a - b).norm() * (1.0 + 1e-6);
    CHECK((ma - mb).cwiseAbs().maxCoeff() <= bound);
  }
}

TEST_CASE("constraint_value hand-computed distances") {
  Eigen::MatrixXd Zt(1, 2);
  Zt << 0.5, 0.5;
  Eigen::VectorXd mu_max(1);
  mu_max << 0.3;
  const ConstraintState cs(Zt, mu_max, 1.0);

  Eigen::VectorXd z(2);
  z << 0.5, 0.9;  // distance 0.4
  CHECK(constraint_value(z, cs) == doctest::Approx(-0.1).epsilon(1e-12));
  z << 0.5, 0.7;  // distance 0.2
  CHECK(constraint_value(z, cs) == doctest::Approx(0.1).epsilon(1e-12));
  z << 0.5, 0.5;  // a training point itself
  CHECK(constraint_value(z, cs) == doctest::Approx(0.3));
}

TEST_CASE("floored Lipschitz constant makes the constraint vacuous") {
  Eigen::MatrixXd Zt(1, 2);
  Zt << 0.5, 0.5;
  Eigen::VectorXd mu_max(1);
  mu_max << 0.3;
  const ConstraintState cs(Zt, mu_max, 1e-9);  // floored to 1e-6 internally
  Eigen::VectorXd corner(2);
  corner << 1.0, 1.0;  // the farthest point in the box
  CHECK(constraint_value(corner, cs) > 0.0);
}

TEST_CASE("UCB proposal with one observation moves far from the data") {
  const JointSurrogate s = one_point_surrogate();
  AcquisitionSpec spec = spec_of(AcquisitionKind::UCB, s.y().minCoeff());
  ProposeOptions po;
  po.search.n_random = 600;
  po.search.n_top = 15;
  const Proposal prop = propose(s, spec, /*constrained=*/false, 37, po);

  // dense-grid comparison of the acquisition surface
  double grid_best = -1e300;
  Eigen::VectorXd grid_arg(2);
  for (int i = 0; i < 50; ++i) {
    for (int j = 0; j < 50; ++j) {
      Eigen::VectorXd z(2);
      z << (i + 0.5) / 50.0, (j + 0.5) / 50.0;
      const PosteriorGaussian p = s.response_posterior_z(z);
      const double a = acq_value(spec, p.mean, std::sqrt(std::max(0.0, p.variance)));
      if (a > grid_best) {
        grid_best = a;
        grid_arg = z;
      }
    }
  }
  CHECK(prop.acquisition >= grid_best - 1e-6);
  const Eigen::VectorXd z_data = s.embedded_training().row(0);
  CHECK((prop.z_star - z_data).norm() >= (grid_arg - z_data).norm() - 0.05);
}

TEST_CASE("constrained proposals are feasible and deterministic") {
  const JointSurrogate s = small_fitted_surrogate(41);
  AcquisitionSpec spec = spec_of(AcquisitionKind::PI, s.y().minCoeff());
  ProposeOptions po;
  po.search.n_random = 300;
  po.search.n_top = 10;
  po.lipschitz.search.n_random = 300;
  po.lipschitz.search.n_top = 8;

  const Proposal a = propose(s, spec, /*constrained=*/true, 43, po);
  const Proposal b = propose(s, spec, /*constrained=*/true, 43, po);
  CHECK((a.z_star - b.z_star).cwiseAbs().maxCoeff() == 0.0);
  CHECK(a.constraint >= -1e-8);
  CHECK(BoxBounds::unit(2).contains(a.z_star));

  // paired run without the constraint stays in-box as well
  const Proposal u = propose(s, spec, /*constrained=*/false, 43, po);
  CHECK(BoxBounds::unit(2).contains(u.z_star));
  // the constrained winner respects the trust radius around the data
  const ConstraintState cs(s, a.lipschitz);
  double dist = 1e300;
  for (Eigen::Index r = 0; r < s.embedded_training().rows(); ++r) {
    dist = std::min(dist, (s.embedded_training().row(r).transpose() - a.z_star).norm());
  }
  double radius = 0.0;
  for (Eigen::Index r = 0; r < s.embedded_training().rows(); ++r) {
    radius = std::max(radius, cs.mu_max(r) / cs.lipschitz());
  }
  CHECK(dist <= radius + 1e-8);
}

TEST_SUITE_END();
