#pragma once

#include "fetl/errors.hpp"
#include "fetl/numcore/types.hpp"

#include <string>
#include <string_view>

namespace fetl {

enum class Activation { identity, relu, tanh };

inline std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
  }
  return "identity";
}

inline Activation activation_from_string(std::string_view name) {
  if (name == "identity") return Activation::identity;
  if (name == "relu") return Activation::relu;
  if (name == "tanh") return Activation::tanh;
  throw ConfigError("unknown activation '" + std::string(name) + "'");
}

template <typename Derived>
MatrixX<typename Derived::Scalar> activate(Activation a, const Eigen::MatrixBase<Derived>& pre) {
  using Scalar = typename Derived::Scalar;
  switch (a) {
    case Activation::relu: return pre.cwiseMax(Scalar(0));
    case Activation::tanh: return pre.array().tanh().matrix();
    case Activation::identity: break;
  }
  return pre;
}

/// Elementwise derivative of the activation, evaluated from the pre-activation
/// and the activation output.
template <typename DerivedPre, typename DerivedOut>
MatrixX<typename DerivedPre::Scalar> activation_derivative(Activation a, const Eigen::MatrixBase<DerivedPre>& pre,
                                                           const Eigen::MatrixBase<DerivedOut>& out) {
  using Scalar = typename DerivedPre::Scalar;
  switch (a) {
    case Activation::relu: return (pre.array() > Scalar(0)).template cast<Scalar>().matrix();
    case Activation::tanh: return (Scalar(1) - out.array().square()).matrix();
    case Activation::identity: break;
  }
  return MatrixX<Scalar>::Ones(pre.rows(), pre.cols());
}

}  // namespace fetl
