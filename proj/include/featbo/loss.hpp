#pragma once

#include <Eigen/Dense>

namespace featbo {

/// A scalar training objective over one flat parameter vector, paired with
/// its exact reverse-accumulated gradient. Implementations may return +inf
/// from value() to signal a numerically infeasible point; optimizers treat
/// that as a rejected step.
class DifferentiableLoss {
 public:
  virtual ~DifferentiableLoss() = default;

  virtual Eigen::Index dim() const = 0;
  virtual double value(const Eigen::Ref<const Eigen::VectorXd>& params) const = 0;

  /// Returns the loss and fills grad (same length as params) in one pass.
  virtual double value_and_gradient(const Eigen::Ref<const Eigen::VectorXd>& params,
                                    Eigen::Ref<Eigen::VectorXd> grad) const = 0;
};

/// Evaluates the exact gradient of a loss at params. Throws
/// std::invalid_argument on a length mismatch and NumericalError when the
/// loss is non-finite at params.
Eigen::VectorXd loss_gradient(const DifferentiableLoss& loss,
                              const Eigen::Ref<const Eigen::VectorXd>& params);

}  // namespace featbo
