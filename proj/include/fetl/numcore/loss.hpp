#pragma once

#include "fetl/errors.hpp"
#include "fetl/numcore/types.hpp"

namespace fetl {

template <typename Scalar>
struct LossResult {
  Scalar loss;
  VectorX<Scalar> gradient;  // dLoss/dpred
};

/// Mean squared error and its gradient 2 (pred - target) / n.
template <typename DerivedP, typename DerivedT>
LossResult<typename DerivedP::Scalar> mse_loss(const Eigen::MatrixBase<DerivedP>& pred,
                                               const Eigen::MatrixBase<DerivedT>& target) {
  using Scalar = typename DerivedP::Scalar;
  if (pred.size() == 0) throw ContractError("mse_loss: empty input");
  if (pred.size() != target.size()) throw ShapeError("mse_loss: pred and target lengths differ");
  VectorX<Scalar> diff = pred.reshaped() - target.reshaped();
  const auto n = static_cast<Scalar>(diff.size());
  return {diff.squaredNorm() / n, Scalar(2) * diff / n};
}

}  // namespace fetl
