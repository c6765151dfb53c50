#include "featbo/benchmarks.hpp"

#include <cmath>
#include <stdexcept>

#include "featbo/math.hpp"

namespace featbo {

namespace {

constexpr double kPi = 3.141592653589793;
constexpr double kTwoPi = 6.283185307179586;

void check_box(const Eigen::Ref<const Eigen::VectorXd>& x, int dim) {
  if (x.size() != dim) {
    throw std::invalid_argument("objective: point has dimension " + std::to_string(x.size()) +
                                ", expected " + std::to_string(dim));
  }
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (!(x[i] >= -1e-9 && x[i] <= 1.0 + 1e-9)) {
      throw std::invalid_argument("objective: point leaves the unit box at coordinate " +
                                  std::to_string(i));
    }
  }
}

}  // namespace

double rosenbrock(const Eigen::Ref<const Eigen::VectorXd>& z) {
  if (z.size() < 2) throw std::invalid_argument("rosenbrock: needs dimension >= 2");
  double acc = 0.0;
  for (Eigen::Index i = 0; i + 1 < z.size(); ++i) {
    const double a = z[i + 1] - z[i] * z[i];
    const double b = z[i] - 1.0;
    acc += 100.0 * a * a + b * b;
  }
  return acc;
}

double product_of_sines(const Eigen::Ref<const Eigen::VectorXd>& z) {
  if (z.size() < 1) throw std::invalid_argument("product_of_sines: needs dimension >= 1");
  double prod = 1.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) prod *= std::sin(z[i]);
  return 10.0 * std::sin(z[0]) * prod;
}

double thomson_potential(const Eigen::Ref<const Eigen::VectorXd>& coded_angles) {
  if (coded_angles.size() < 4 || coded_angles.size() % 2 != 0) {
    throw std::invalid_argument("thomson_potential: needs an even dimension >= 4");
  }
  const Eigen::Index n_p = coded_angles.size() / 2;
  Eigen::MatrixXd pts(n_p, 3);
  for (Eigen::Index i = 0; i < n_p; ++i) {
    const double azimuth = kTwoPi * coded_angles[2 * i];
    const double polar = kPi * coded_angles[2 * i + 1];
    pts(i, 0) = std::sin(polar) * std::cos(azimuth);
    pts(i, 1) = std::sin(polar) * std::sin(azimuth);
    pts(i, 2) = std::cos(polar);
  }
  double acc = 0.0;
  for (Eigen::Index i = 0; i + 1 < n_p; ++i) {
    for (Eigen::Index j = i + 1; j < n_p; ++j) {
      const double dist = (pts.row(i) - pts.row(j)).norm();
      if (dist < 1e-12) return 1e12;  // coincident electrons: finite cap
      acc += 1.0 / dist;
    }
  }
  return acc;
}

Eigen::MatrixXd make_orthogonal_embedding(int d, int D, std::uint64_t seed) {
  if (d < 1 || d > D) {
    throw std::invalid_argument("make_orthogonal_embedding: need 1 <= d <= D");
  }
  Rng rng(seed);
  Eigen::MatrixXd G(D, d);
  for (Eigen::Index j = 0; j < d; ++j)
    for (Eigen::Index i = 0; i < D; ++i) G(i, j) = rng.normal();
  // Orthonormal columns of the D x d factor become orthonormal rows of R.
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(G);
  Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(D, d);
  return Q.transpose();
}

EmbeddedObjective EmbeddedObjective::rosenbrock_linear(int d, int D, std::uint64_t embed_seed) {
  EmbeddedObjective o;
  o.intrinsic_ = IntrinsicKind::Rosenbrock;
  o.embedding_ = EmbeddingKind::LinearOrthogonal;
  o.d_ = d;
  o.D_ = D;
  o.scale_ = 2.0 * std::sqrt(static_cast<double>(d));
  o.R_ = make_orthogonal_embedding(d, D, embed_seed);
  o.f_min_ = 0.0;
  return o;
}

EmbeddedObjective EmbeddedObjective::sines_linear(int d, int D, std::uint64_t embed_seed) {
  EmbeddedObjective o;
  o.intrinsic_ = IntrinsicKind::ProductOfSines;
  o.embedding_ = EmbeddingKind::LinearOrthogonal;
  o.d_ = d;
  o.D_ = D;
  o.scale_ = 2.0 * std::sqrt(static_cast<double>(d));
  o.R_ = make_orthogonal_embedding(d, D, embed_seed);
  o.f_min_ = -10.0;
  return o;
}

EmbeddedObjective EmbeddedObjective::sines_sigmoid(int d, int D, std::uint64_t embed_seed) {
  EmbeddedObjective o = sines_linear(d, D, embed_seed);
  o.embedding_ = EmbeddingKind::SigmoidOfLinear;
  return o;
}

EmbeddedObjective EmbeddedObjective::sines_identity(int d) {
  EmbeddedObjective o;
  o.intrinsic_ = IntrinsicKind::ProductOfSines;
  o.embedding_ = EmbeddingKind::Identity;
  o.d_ = d;
  o.D_ = d;
  o.scale_ = 2.0 * std::sqrt(static_cast<double>(d));
  o.f_min_ = -10.0;
  return o;
}

EmbeddedObjective EmbeddedObjective::thomson(int n_p) {
  if (n_p < 2) throw std::invalid_argument("thomson: needs at least two electrons");
  EmbeddedObjective o;
  o.intrinsic_ = IntrinsicKind::ThomsonSpherical;
  o.embedding_ = EmbeddingKind::Identity;
  o.d_ = 2 * n_p;
  o.D_ = 2 * n_p;
  o.scale_ = 1.0;
  if (n_p == 2) o.f_min_ = 0.5;  // antipodal pair at distance 2
  if (n_p == 6) o.f_min_ = 6.0 * kSqrt2 + 1.5;  // octahedron: 12 edges sqrt(2), 3 diameters 2
  return o;
}

Eigen::VectorXd EmbeddedObjective::intrinsic_point(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  check_box(x, D_);
  if (intrinsic_ == IntrinsicKind::ThomsonSpherical) return x;

  const Eigen::VectorXd u = scale_ * (2.0 * x.array() - 1.0);
  switch (embedding_) {
    case EmbeddingKind::Identity:
      return u;
    case EmbeddingKind::LinearOrthogonal:
      return R_ * u;
    case EmbeddingKind::SigmoidOfLinear: {
      Eigen::VectorXd v = (R_ * u).unaryExpr([](double t) { return sigmoid(t); });
      return kPi * (2.0 * v.array() - 1.0);
    }
  }
  return u;
}

double EmbeddedObjective::f_true(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  const Eigen::VectorXd z = intrinsic_point(x);
  switch (intrinsic_) {
    case IntrinsicKind::Rosenbrock: return rosenbrock(z);
    case IntrinsicKind::ProductOfSines: return product_of_sines(z);
    case IntrinsicKind::ThomsonSpherical: return thomson_potential(z);
  }
  return 0.0;
}

std::pair<double, double> EmbeddedObjective::evaluate(const Eigen::Ref<const Eigen::VectorXd>& x,
                                                      Rng& rng) const {
  const double f = f_true(x);
  const double noise = noise_variance_ > 0.0 ? std::sqrt(noise_variance_) * rng.normal() : 0.0;
  return {f + noise, f};
}

Eigen::VectorXd EmbeddedObjective::preimage(const Eigen::Ref<const Eigen::VectorXd>& z) const {
  if (intrinsic_ == IntrinsicKind::ThomsonSpherical) {
    if (z.size() != D_) throw std::invalid_argument("preimage: dimension mismatch");
    return z;
  }
  if (z.size() != d_) throw std::invalid_argument("preimage: dimension mismatch");
  Eigen::VectorXd u;
  switch (embedding_) {
    case EmbeddingKind::Identity:
      u = z;
      break;
    case EmbeddingKind::LinearOrthogonal:
      u = R_.transpose() * z;
      break;
    case EmbeddingKind::SigmoidOfLinear: {
      Eigen::VectorXd w(z.size());
      for (Eigen::Index i = 0; i < z.size(); ++i) {
        const double v = (z[i] + kPi) / (2.0 * kPi);
        if (!(v > 0.0 && v < 1.0)) {
          throw std::invalid_argument("preimage: intrinsic point outside the sigmoid range");
        }
        w[i] = logit(v);
      }
      u = R_.transpose() * w;
      break;
    }
  }
  Eigen::VectorXd x = (u.array() / scale_ + 1.0) / 2.0;
  return x.cwiseMax(0.0).cwiseMin(1.0);
}

const std::vector<BenchmarkInfo>& benchmark_registry() {
  static const std::vector<BenchmarkInfo> registry = [] {
    std::vector<BenchmarkInfo> r;
    r.push_back({"rosenbrock-linear", "Rosenbrock d=10 behind an orthogonal embedding into D=60",
                 10, EmbeddedObjective::rosenbrock_linear(10, 60, 101)});
    r.push_back({"sines-linear", "product of sines d=10 behind an orthogonal embedding into D=60",
                 10, EmbeddedObjective::sines_linear(10, 60, 202)});
    r.push_back({"sines-nonlinear",
                 "product of sines d=10 behind a sigmoid-of-linear embedding into D=60", 10,
                 EmbeddedObjective::sines_sigmoid(10, 60, 303)});
    r.push_back({"thomson6", "Thomson potential of 6 electrons on the unit sphere (D=12)", 4,
                 EmbeddedObjective::thomson(6)});
    r.push_back({"sines-identity-small", "product of sines d=6 on its own box (CI-scale problem)",
                 2, EmbeddedObjective::sines_identity(6)});
    return r;
  }();
  return registry;
}

const BenchmarkInfo* find_benchmark(const std::string& name) {
  for (const auto& b : benchmark_registry()) {
    if (b.name == name) return &b;
  }
  return nullptr;
}

}  // namespace featbo
