#include "featbo/loss.hpp"

#include <cmath>
#include <stdexcept>

#include "featbo/common.hpp"

namespace featbo {

Eigen::VectorXd loss_gradient(const DifferentiableLoss& loss,
                              const Eigen::Ref<const Eigen::VectorXd>& params) {
  if (params.size() != loss.dim()) {
    throw std::invalid_argument("loss_gradient: parameter vector has length " +
                                std::to_string(params.size()) + ", loss expects " +
                                std::to_string(loss.dim()));
  }
  Eigen::VectorXd grad(params.size());
  const double v = loss.value_and_gradient(params, grad);
  if (!std::isfinite(v)) {
    throw NumericalError("loss_gradient: loss is not finite at the given parameters");
  }
  return grad;
}

}  // namespace featbo
