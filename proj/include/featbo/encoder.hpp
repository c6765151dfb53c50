#pragma once

#include <Eigen/Dense>

#include "featbo/rng.hpp"

namespace featbo {

/// Parameters of the deterministic feature map h: [0,1]^D -> (0,1)^d, a
/// single-hidden-layer network with sigmoid activations on both layers.
/// flatten()/unflatten() give the deterministic bijection used to expose the
/// weights to the optimizer as one contiguous segment.
struct FeatureMapParams {
  Eigen::MatrixXd W1;  // hidden x D
  Eigen::VectorXd b1;  // hidden
  Eigen::MatrixXd W2;  // d x hidden
  Eigen::VectorXd b2;  // d

  Eigen::Index input_dim() const { return W1.cols(); }
  Eigen::Index hidden_dim() const { return W1.rows(); }
  Eigen::Index feature_dim() const { return W2.rows(); }
  Eigen::Index param_count() const {
    return W1.size() + b1.size() + W2.size() + b2.size();
  }

  Eigen::VectorXd flatten() const;
  static FeatureMapParams unflatten(const Eigen::Ref<const Eigen::VectorXd>& v,
                                    Eigen::Index input_dim, Eigen::Index hidden_dim,
                                    Eigen::Index feature_dim);

  /// Weights ~ uniform(-0.5, 0.5)/sqrt(fan-in), biases zero.
  static FeatureMapParams init(Eigen::Index input_dim, Eigen::Index hidden_dim,
                               Eigen::Index feature_dim, Rng& rng);
};

/// Row-wise forward pass: Z[n] = sigmoid(W2 sigmoid(W1 X[n] + b1) + b2).
Eigen::MatrixXd encode(const FeatureMapParams& p, const Eigen::Ref<const Eigen::MatrixXd>& X);

/// Forward pass retaining hidden activations for backpropagation.
struct EncodeCache {
  Eigen::MatrixXd H;  // N x hidden
  Eigen::MatrixXd Z;  // N x d
};
EncodeCache encode_with_cache(const FeatureMapParams& p, const Eigen::Ref<const Eigen::MatrixXd>& X);

/// Given dL/dZ, accumulates the loss gradient with respect to the encoder
/// parameters, in flatten() order.
Eigen::VectorXd encode_backprop(const FeatureMapParams& p, const Eigen::Ref<const Eigen::MatrixXd>& X,
                                const EncodeCache& cache, const Eigen::Ref<const Eigen::MatrixXd>& dZ);

}  // namespace featbo
