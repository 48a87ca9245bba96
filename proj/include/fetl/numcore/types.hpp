#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <random>

namespace fetl {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Flat, writable view over one contiguous parameter tensor.
template <typename Scalar>
using ParamBlock = Eigen::Map<VectorX<Scalar>>;

using Index = Eigen::Index;
using Rng = std::mt19937_64;

/// Independent generator for a (seed, stream) pair.
inline Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return Rng(seq);
}

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& x) {
  return x.allFinite();
}

}  // namespace fetl
