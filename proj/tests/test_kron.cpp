#include <doctest.h>

#include <Eigen/Dense>

#include "featbo/kron.hpp"
#include "test_helpers.hpp"

using namespace featbo;
using testing::dense_kron;
using testing::random_spd;
using testing::random_vector;

TEST_SUITE_BEGIN("kron");

TEST_CASE("matvec with identity factors is the identity") {
  kron::KronFactors f({Eigen::MatrixXd::Identity(2, 2), Eigen::MatrixXd::Identity(3, 3)});
  Rng rng(7);
  const Eigen::VectorXd x = random_vector(6, rng);
  CHECK((kron::matvec(f, x) - x).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
}

TEST_CASE("matvec with diagonal factors scales blocks") {
  Eigen::MatrixXd d1(2, 2);
  d1 << 2, 0, 0, 3;
  kron::KronFactors f({d1, Eigen::MatrixXd::Identity(2, 2)});
  Eigen::VectorXd x = Eigen::VectorXd::Ones(4);
  Eigen::VectorXd expect(4);
  expect << 2, 2, 3, 3;
  CHECK((kron::matvec(f, x) - expect).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("matvec matches the dense Kronecker oracle") {
  Rng rng(11);
  for (int rep = 0; rep < 5; ++rep) {
    const Eigen::MatrixXd A = random_spd(3, rng);
    const Eigen::MatrixXd B = random_spd(4, rng);
    kron::KronFactors f({A, B});
    const Eigen::VectorXd x = random_vector(12, rng);
    const Eigen::VectorXd got = kron::matvec(f, x);
    const Eigen::VectorXd want = dense_kron({A, B}) * x;
    CHECK((got - want).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("matvec handles three factors") {
  Rng rng(13);
  const Eigen::MatrixXd A = random_spd(2, rng), B = random_spd(3, rng), C = random_spd(2, rng);
  kron::KronFactors f({A, B, C});
  const Eigen::VectorXd x = random_vector(12, rng);
  CHECK((kron::matvec(f, x) - dense_kron({A, B, C}) * x).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("matvec rejects a length mismatch") {
  kron::KronFactors f({Eigen::MatrixXd::Identity(2, 2)});
  CHECK_THROWS_AS(kron::matvec(f, Eigen::VectorXd::Ones(3)), std::invalid_argument);
}

TEST_CASE("construction rejects an asymmetric factor") {
  Eigen::MatrixXd bad(2, 2);
  bad << 1, 0.5, 0.0, 1;
  CHECK_THROWS_AS(kron::KronFactors({bad}), std::invalid_argument);
}

TEST_CASE("eig of the identity") {
  kron::KronFactors f({Eigen::MatrixXd::Identity(3, 3)});
  const kron::KronEig e = kron::eig(f);
  CHECK((e.eigval_factors[0] - Eigen::VectorXd::Ones(3)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((e.eigvec_factors[0] * e.eigvec_factors[0].transpose() - Eigen::MatrixXd::Identity(3, 3))
            .cwiseAbs()
            .maxCoeff() < 1e-12);
}

TEST_CASE("eig of a diagonal factor returns its entries") {
  Eigen::MatrixXd d(2, 2);
  d << 2, 0, 0, 5;
  const kron::KronEig e = kron::eig(kron::KronFactors({d}));
  Eigen::VectorXd vals = e.eigval_factors[0];
  std::sort(vals.data(), vals.data() + vals.size());
  CHECK(vals[0] == doctest::Approx(2.0));
  CHECK(vals[1] == doctest::Approx(5.0));
}

TEST_CASE("eig reconstructs a random SPD factor") {
  Rng rng(17);
  const Eigen::MatrixXd S = random_spd(5, rng);
  const kron::KronEig e = kron::eig(kron::KronFactors({S}));
  const Eigen::MatrixXd rebuilt = e.eigvec_factors[0] * e.eigval_factors[0].asDiagonal() *
                                  e.eigvec_factors[0].transpose();
  CHECK((rebuilt - S).cwiseAbs().maxCoeff() < 1e-9);
  CHECK((e.eigvec_factors[0] * e.eigvec_factors[0].transpose() -
         Eigen::MatrixXd::Identity(5, 5))
            .cwiseAbs()
            .maxCoeff() < 1e-8);
}

TEST_CASE("solve_noisy with unit eigenvalues halves the vector") {
  kron::KronFactors f({Eigen::MatrixXd::Identity(2, 2), Eigen::MatrixXd::Identity(2, 2)});
  kron::NoisyKron nk(kron::eig(f), 1.0);
  Rng rng(19);
  const Eigen::VectorXd x = random_vector(4, rng);
  CHECK((kron::solve_noisy(nk, x) - 0.5 * x).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("solve_noisy scalar case") {
  Eigen::MatrixXd two(1, 1), three(1, 1);
  two << 2;
  three << 3;
  kron::NoisyKron nk(kron::eig(kron::KronFactors({two, three})), 1.0);
  Eigen::VectorXd x(1);
  x << 7;
  CHECK(kron::solve_noisy(nk, x)[0] == doctest::Approx(1.0));
}

TEST_CASE("solve_noisy matches a dense Cholesky solve") {
  Rng rng(23);
  const Eigen::MatrixXd A = random_spd(4, rng);
  const Eigen::MatrixXd B = random_spd(6, rng);
  const double s2 = 0.1;
  kron::NoisyKron nk(kron::eig(kron::KronFactors({A, B})), s2);
  const Eigen::VectorXd x = random_vector(24, rng);
  const Eigen::VectorXd got = kron::solve_noisy(nk, x);

  Eigen::MatrixXd dense = dense_kron({A, B});
  dense.diagonal().array() += s2;
  const Eigen::VectorXd want = dense.llt().solve(x);
  CHECK((got - want).norm() / want.norm() < 1e-8);
}

TEST_CASE("round trip: applying the noisy matrix to the solve recovers x") {
  Rng rng(29);
  const Eigen::MatrixXd A = random_spd(3, rng);
  const Eigen::MatrixXd B = random_spd(5, rng);
  kron::KronFactors f({A, B});
  const double s2 = 0.3;
  kron::NoisyKron nk(kron::eig(f), s2);
  const Eigen::VectorXd x = random_vector(15, rng);
  const Eigen::VectorXd sol = kron::solve_noisy(nk, x);
  const Eigen::VectorXd back = kron::matvec(f, sol) + s2 * sol;
  CHECK((back - x).norm() / x.norm() < 1e-8);
}

TEST_CASE("logdet_noisy trivial cases") {
  kron::NoisyKron id2(kron::eig(kron::KronFactors({Eigen::MatrixXd::Identity(2, 2)})), 1.0);
  CHECK(kron::logdet_noisy(id2) == doctest::Approx(2.0 * std::log(2.0)));

  Eigen::MatrixXd two(1, 1), three(1, 1);
  two << 2;
  three << 3;
  kron::NoisyKron scalar(kron::eig(kron::KronFactors({two, three})), 1.0);
  CHECK(kron::logdet_noisy(scalar) == doctest::Approx(std::log(7.0)));
}

TEST_CASE("logdet_noisy matches the dense determinant") {
  Rng rng(31);
  const Eigen::MatrixXd A = random_spd(3, rng);
  const Eigen::MatrixXd B = random_spd(3, rng);
  const double s2 = 0.5;
  kron::NoisyKron nk(kron::eig(kron::KronFactors({A, B})), s2);
  Eigen::MatrixXd dense = dense_kron({A, B});
  dense.diagonal().array() += s2;
  const double want = 2.0 * dense.llt().matrixLLT().diagonal().array().log().sum();
  CHECK(kron::logdet_noisy(nk) == doctest::Approx(want).epsilon(1e-8));
}

TEST_CASE("quadform trivial and dense-checked") {
  kron::NoisyKron id(kron::eig(kron::KronFactors(
                         {Eigen::MatrixXd::Identity(2, 2), Eigen::MatrixXd::Identity(2, 2)})),
                     1.0);
  Eigen::VectorXd e(4);
  e << 2, 0, 0, 0;
  CHECK(kron::quadform(id, e) == doctest::Approx(2.0));

  Eigen::MatrixXd two(1, 1), three(1, 1);
  two << 2;
  three << 3;
  kron::NoisyKron scalar(kron::eig(kron::KronFactors({two, three})), 1.0);
  Eigen::VectorXd x(1);
  x << 7;
  CHECK(kron::quadform(scalar, x) == doctest::Approx(7.0));

  Rng rng(37);
  const Eigen::MatrixXd A = random_spd(4, rng);
  const Eigen::MatrixXd B = random_spd(5, rng);
  const double s2 = 0.2;
  kron::NoisyKron nk(kron::eig(kron::KronFactors({A, B})), s2);
  const Eigen::VectorXd v = random_vector(20, rng);
  Eigen::MatrixXd dense = dense_kron({A, B});
  dense.diagonal().array() += s2;
  const double want = v.dot(dense.llt().solve(v));
  CHECK(kron::quadform(nk, v) == doctest::Approx(want).epsilon(1e-8));
  CHECK(kron::quadform(nk, v) >= 0.0);
}

TEST_CASE("noise variance must be strictly positive") {
  kron::KronFactors f({Eigen::MatrixXd::Identity(2, 2)});
  CHECK_THROWS_AS(kron::NoisyKron(kron::eig(f), 0.0), std::invalid_argument);
  CHECK_THROWS_AS(kron::NoisyKron(kron::eig(f), -1.0), std::invalid_argument);
}

TEST_SUITE_END();
