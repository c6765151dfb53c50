#include "featbo/encoder.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "featbo/math.hpp"

namespace featbo {

namespace {

void check_input(const FeatureMapParams& p, const Eigen::Ref<const Eigen::MatrixXd>& X) {
  if (X.cols() != p.input_dim()) {
    throw std::invalid_argument("encode: input has " + std::to_string(X.cols()) +
                                " columns, feature map expects " + std::to_string(p.input_dim()));
  }
}

}  // namespace

Eigen::VectorXd FeatureMapParams::flatten() const {
  Eigen::VectorXd v(param_count());
  Eigen::Index at = 0;
  v.segment(at, W1.size()) = Eigen::Map<const Eigen::VectorXd>(W1.data(), W1.size());
  at += W1.size();
  v.segment(at, b1.size()) = b1;
  at += b1.size();
  v.segment(at, W2.size()) = Eigen::Map<const Eigen::VectorXd>(W2.data(), W2.size());
  at += W2.size();
  v.segment(at, b2.size()) = b2;
  return v;
}

FeatureMapParams FeatureMapParams::unflatten(const Eigen::Ref<const Eigen::VectorXd>& v,
                                             Eigen::Index input_dim, Eigen::Index hidden_dim,
                                             Eigen::Index feature_dim) {
  const Eigen::Index expect = hidden_dim * input_dim + hidden_dim + feature_dim * hidden_dim + feature_dim;
  if (v.size() != expect) {
    throw std::invalid_argument("FeatureMapParams::unflatten: expected " + std::to_string(expect) +
                                " values, got " + std::to_string(v.size()));
  }
  FeatureMapParams p;
  Eigen::Index at = 0;
  p.W1 = Eigen::Map<const Eigen::MatrixXd>(v.data() + at, hidden_dim, input_dim);
  at += hidden_dim * input_dim;
  p.b1 = v.segment(at, hidden_dim);
  at += hidden_dim;
  p.W2 = Eigen::Map<const Eigen::MatrixXd>(v.data() + at, feature_dim, hidden_dim);
  at += feature_dim * hidden_dim;
  p.b2 = v.segment(at, feature_dim);
  return p;
}

FeatureMapParams FeatureMapParams::init(Eigen::Index input_dim, Eigen::Index hidden_dim,
                                        Eigen::Index feature_dim, Rng& rng) {
  FeatureMapParams p;
  const double s1 = 1.0 / std::sqrt(static_cast<double>(input_dim));
  const double s2 = 1.0 / std::sqrt(static_cast<double>(hidden_dim));
  p.W1.resize(hidden_dim, input_dim);
  for (Eigen::Index j = 0; j < p.W1.cols(); ++j)
    for (Eigen::Index i = 0; i < p.W1.rows(); ++i) p.W1(i, j) = rng.uniform(-0.5, 0.5) * s1;
  p.b1 = Eigen::VectorXd::Zero(hidden_dim);
  p.W2.resize(feature_dim, hidden_dim);
  for (Eigen::Index j = 0; j < p.W2.cols(); ++j)
    for (Eigen::Index i = 0; i < p.W2.rows(); ++i) p.W2(i, j) = rng.uniform(-0.5, 0.5) * s2;
  p.b2 = Eigen::VectorXd::Zero(feature_dim);
  return p;
}

Eigen::MatrixXd encode(const FeatureMapParams& p, const Eigen::Ref<const Eigen::MatrixXd>& X) {
  return encode_with_cache(p, X).Z;
}

EncodeCache encode_with_cache(const FeatureMapParams& p, const Eigen::Ref<const Eigen::MatrixXd>& X) {
  check_input(p, X);
  EncodeCache c;
  c.H = ((X * p.W1.transpose()).rowwise() + p.b1.transpose())
            .unaryExpr([](double t) { return sigmoid(t); });
  // saturated outputs are nudged off the closed endpoints so features stay
  // strictly inside the open cube
  c.Z = ((c.H * p.W2.transpose()).rowwise() + p.b2.transpose()).unaryExpr([](double t) {
    const double s = sigmoid(t);
    if (s >= 1.0) return 1.0 - std::numeric_limits<double>::epsilon() / 2.0;
    if (s <= 0.0) return std::numeric_limits<double>::min();
    return s;
  });
  return c;
}

Eigen::VectorXd encode_backprop(const FeatureMapParams& p, const Eigen::Ref<const Eigen::MatrixXd>& X,
                                const EncodeCache& cache, const Eigen::Ref<const Eigen::MatrixXd>& dZ) {
  check_input(p, X);
  if (dZ.rows() != X.rows() || dZ.cols() != p.feature_dim()) {
    throw std::invalid_argument("encode_backprop: dZ shape mismatch");
  }
  // dA2 = dZ . z(1-z), rowwise through the output sigmoid
  const Eigen::MatrixXd dA2 = dZ.array() * cache.Z.array() * (1.0 - cache.Z.array());
  const Eigen::MatrixXd dW2 = dA2.transpose() * cache.H;
  const Eigen::VectorXd db2 = dA2.colwise().sum();
  const Eigen::MatrixXd dH = dA2 * p.W2;
  const Eigen::MatrixXd dA1 = dH.array() * cache.H.array() * (1.0 - cache.H.array());
  const Eigen::MatrixXd dW1 = dA1.transpose() * X;
  const Eigen::VectorXd db1 = dA1.colwise().sum();

  FeatureMapParams g;
  g.W1 = dW1;
  g.b1 = db1;
  g.W2 = dW2;
  g.b2 = db2;
  return g.flatten();
}

}  // namespace featbo
