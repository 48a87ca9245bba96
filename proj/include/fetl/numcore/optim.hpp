#pragma once

#include "fetl/errors.hpp"
#include "fetl/numcore/types.hpp"

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace fetl {

template <typename Scalar>
struct AdamState {
  Scalar lr = Scalar(1e-3);
  Scalar beta1 = Scalar(0.9);
  Scalar beta2 = Scalar(0.999);
  Scalar eps = Scalar(1e-8);
  std::int64_t step = 0;
  std::vector<VectorX<Scalar>> first_moment;
  std::vector<VectorX<Scalar>> second_moment;

  void validate() const {
    if (!(lr >= Scalar(0)) || !std::isfinite(lr)) throw ConfigError("adam: lr must be finite and non-negative");
    if (!(beta1 > 0 && beta1 < 1) || !(beta2 > 0 && beta2 < 1)) throw ConfigError("adam: betas must lie in (0, 1)");
    if (!(eps > 0)) throw ConfigError("adam: eps must be positive");
  }
};

namespace detail {

template <typename Scalar>
void check_blocks(std::span<ParamBlock<Scalar>> params, std::span<const VectorX<Scalar>> grads, const char* who) {
  if (params.size() != grads.size())
    throw ShapeError(std::string(who) + ": " + std::to_string(params.size()) + " parameter blocks but " +
                     std::to_string(grads.size()) + " gradient blocks");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].size() != grads[i].size())
      throw ShapeError(std::string(who) + ": block " + std::to_string(i) + " size mismatch");
    if (!grads[i].allFinite()) throw NumericalError(std::string(who) + ": non-finite gradient in block " + std::to_string(i));
  }
}

}  // namespace detail

/// One bias-corrected Adam update. Moments are allocated on the first call and
/// must keep matching the block layout afterwards.
template <typename Scalar>
void adam_step(std::span<ParamBlock<Scalar>> params, std::span<const VectorX<Scalar>> grads, AdamState<Scalar>& state) {
  detail::check_blocks(params, grads, "adam_step");
  if (state.first_moment.empty() && state.step == 0) {
    for (const auto& p : params) {
      state.first_moment.push_back(VectorX<Scalar>::Zero(p.size()));
      state.second_moment.push_back(VectorX<Scalar>::Zero(p.size()));
    }
  }
  if (state.first_moment.size() != params.size()) throw ShapeError("adam_step: state does not mirror parameter blocks");
  ++state.step;
  const Scalar t = static_cast<Scalar>(state.step);
  const Scalar c1 = Scalar(1) - std::pow(state.beta1, t);
  const Scalar c2 = Scalar(1) - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    if (m.size() != params[i].size()) throw ShapeError("adam_step: state does not mirror parameter blocks");
    m = state.beta1 * m + (Scalar(1) - state.beta1) * grads[i];
    v = state.beta2 * v + (Scalar(1) - state.beta2) * grads[i].cwiseAbs2();
    params[i].array() -= state.lr * (m.array() / c1) / ((v.array() / c2).sqrt() + state.eps);
  }
}

template <typename Scalar>
void sgd_step(std::span<ParamBlock<Scalar>> params, std::span<const VectorX<Scalar>> grads, Scalar lr) {
  detail::check_blocks(params, grads, "sgd_step");
  for (std::size_t i = 0; i < params.size(); ++i) params[i] -= lr * grads[i];
}

}  // namespace fetl
