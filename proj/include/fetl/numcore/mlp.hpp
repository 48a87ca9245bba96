#pragma once

#include "fetl/errors.hpp"
#include "fetl/numcore/activation.hpp"
#include "fetl/numcore/types.hpp"

#include <cmath>
#include <span>
#include <string>
#include <vector>

namespace fetl {

template <typename Scalar>
struct DenseLayer {
  MatrixX<Scalar> weights;  // out x in
  VectorX<Scalar> biases;   // out
  Activation activation = Activation::identity;

  Index input_size() const { return weights.cols(); }
  Index output_size() const { return weights.rows(); }

  static DenseLayer zeros(Index in, Index out, Activation act) {
    return {MatrixX<Scalar>::Zero(out, in), VectorX<Scalar>::Zero(out), act};
  }
};

template <typename Scalar>
struct Mlp {
  std::vector<DenseLayer<Scalar>> layers;

  Index input_size() const { return layers.front().input_size(); }
  Index output_size() const { return layers.back().output_size(); }

  /// Throws ShapeError unless the layers chain and every entry is finite.
  void validate() const {
    if (layers.empty()) throw ShapeError("mlp has no layers");
    for (std::size_t k = 0; k < layers.size(); ++k) {
      const auto& l = layers[k];
      if (l.weights.rows() != l.biases.size())
        throw ShapeError("layer " + std::to_string(k) + ": weights rows != biases length");
      if (k > 0 && l.input_size() != layers[k - 1].output_size())
        throw ShapeError("layer " + std::to_string(k) + ": input size does not match previous output");
      if (!l.weights.allFinite() || !l.biases.allFinite())
        throw NumericalError("layer " + std::to_string(k) + ": non-finite parameter");
    }
  }

  Index parameter_count() const {
    Index n = 0;
    for (const auto& l : layers) n += l.weights.size() + l.biases.size();
    return n;
  }

  bool operator==(const Mlp& other) const {
    if (layers.size() != other.layers.size()) return false;
    for (std::size_t k = 0; k < layers.size(); ++k) {
      const auto& a = layers[k];
      const auto& b = other.layers[k];
      if (a.activation != b.activation || a.weights.rows() != b.weights.rows() || a.weights.cols() != b.weights.cols() ||
          a.weights != b.weights || a.biases != b.biases)
        return false;
    }
    return true;
  }
};

/// Activation record of one forward pass. `activations[0]` is the input and
/// `activations[k + 1]` the output of layer k; `pre_activations[k]` is W x + b.
template <typename Scalar>
struct Tape {
  const Mlp<Scalar>* source = nullptr;
  std::vector<MatrixX<Scalar>> activations;
  std::vector<MatrixX<Scalar>> pre_activations;
};

template <typename Scalar>
struct ForwardPass {
  MatrixX<Scalar> output;  // out x batch
  Tape<Scalar> tape;
};

template <typename Scalar>
struct MlpGradients {
  std::vector<MatrixX<Scalar>> weights;
  std::vector<VectorX<Scalar>> biases;
  MatrixX<Scalar> input;  // dLoss/dx, in x batch

  static MlpGradients zeros_like(const Mlp<Scalar>& mlp) {
    MlpGradients g;
    for (const auto& l : mlp.layers) {
      g.weights.push_back(MatrixX<Scalar>::Zero(l.weights.rows(), l.weights.cols()));
      g.biases.push_back(VectorX<Scalar>::Zero(l.biases.size()));
    }
    return g;
  }
};

/// Column-batched forward pass: each column of `x` is one input.
template <typename Scalar, typename Derived>
ForwardPass<Scalar> forward(const Mlp<Scalar>& mlp, const Eigen::MatrixBase<Derived>& x) {
  if (mlp.layers.empty()) throw ShapeError("forward: mlp has no layers");
  if (x.rows() != mlp.input_size())
    throw ShapeError("forward: input has " + std::to_string(x.rows()) + " rows, mlp expects " +
                     std::to_string(mlp.input_size()));
  ForwardPass<Scalar> pass;
  pass.tape.source = &mlp;
  pass.tape.activations.reserve(mlp.layers.size() + 1);
  pass.tape.pre_activations.reserve(mlp.layers.size());
  pass.tape.activations.emplace_back(x);
  for (const auto& layer : mlp.layers) {
    MatrixX<Scalar> pre = layer.weights * pass.tape.activations.back();
    pre.colwise() += layer.biases;
    pass.tape.activations.push_back(activate(layer.activation, pre));
    pass.tape.pre_activations.push_back(std::move(pre));
  }
  pass.output = pass.tape.activations.back();
  return pass;
}

/// Forward pass without recording a tape.
template <typename Scalar, typename Derived>
MatrixX<Scalar> infer(const Mlp<Scalar>& mlp, const Eigen::MatrixBase<Derived>& x) {
  if (mlp.layers.empty()) throw ShapeError("infer: mlp has no layers");
  if (x.rows() != mlp.input_size()) throw ShapeError("infer: input size mismatch");
  MatrixX<Scalar> h = x;
  for (const auto& layer : mlp.layers) {
    MatrixX<Scalar> pre = layer.weights * h;
    pre.colwise() += layer.biases;
    h = activate(layer.activation, pre);
  }
  return h;
}

/// Reverse pass. Parameter gradients are summed over the batch columns.
template <typename Scalar, typename Derived>
MlpGradients<Scalar> backward(const Mlp<Scalar>& mlp, const Tape<Scalar>& tape,
                              const Eigen::MatrixBase<Derived>& upstream) {
  const std::size_t depth = mlp.layers.size();
  if (tape.source != &mlp || tape.pre_activations.size() != depth || tape.activations.size() != depth + 1)
    throw ContractError("backward: tape was not produced by a forward pass of this mlp");
  for (std::size_t k = 0; k < depth; ++k) {
    if (tape.pre_activations[k].rows() != mlp.layers[k].output_size() ||
        tape.activations[k].rows() != mlp.layers[k].input_size())
      throw ContractError("backward: tape is stale (layer " + std::to_string(k) + " shape changed)");
  }
  const auto& out = tape.activations.back();
  if (upstream.rows() != out.rows() || upstream.cols() != out.cols())
    throw ShapeError("backward: upstream gradient shape does not match output");

  MlpGradients<Scalar> g;
  g.weights.resize(depth);
  g.biases.resize(depth);
  MatrixX<Scalar> delta = upstream;
  for (std::size_t k = depth; k-- > 0;) {
    const auto& layer = mlp.layers[k];
    delta.array() *= activation_derivative(layer.activation, tape.pre_activations[k], tape.activations[k + 1]).array();
    g.weights[k].noalias() = delta * tape.activations[k].transpose();
    g.biases[k] = delta.rowwise().sum();
    MatrixX<Scalar> next = layer.weights.transpose() * delta;
    delta = std::move(next);
  }
  g.input = std::move(delta);
  return g;
}

/// Views over every parameter tensor, ordered (w0, b0, w1, b1, ...).
template <typename Scalar>
std::vector<ParamBlock<Scalar>> parameter_blocks(Mlp<Scalar>& mlp) {
  std::vector<ParamBlock<Scalar>> blocks;
  for (auto& l : mlp.layers) {
    blocks.emplace_back(l.weights.data(), l.weights.size());
    blocks.emplace_back(l.biases.data(), l.biases.size());
  }
  return blocks;
}

/// Gradients flattened in the same order as parameter_blocks().
template <typename Scalar>
std::vector<VectorX<Scalar>> gradient_blocks(const MlpGradients<Scalar>& g) {
  std::vector<VectorX<Scalar>> blocks;
  for (std::size_t k = 0; k < g.weights.size(); ++k) {
    blocks.push_back(Eigen::Map<const VectorX<Scalar>>(g.weights[k].data(), g.weights[k].size()));
    blocks.push_back(g.biases[k]);
  }
  return blocks;
}

/// He-normal for relu layers, Xavier-uniform otherwise; biases start at zero.
template <typename Scalar>
void initialize(DenseLayer<Scalar>& layer, Rng& rng) {
  const auto fan_in = static_cast<Scalar>(layer.input_size());
  const auto fan_out = static_cast<Scalar>(layer.output_size());
  if (layer.activation == Activation::relu) {
    std::normal_distribution<Scalar> dist(Scalar(0), std::sqrt(Scalar(2) / fan_in));
    layer.weights = layer.weights.unaryExpr([&](Scalar) { return dist(rng); });
  } else {
    const Scalar bound = std::sqrt(Scalar(6) / (fan_in + fan_out));
    std::uniform_real_distribution<Scalar> dist(-bound, bound);
    layer.weights = layer.weights.unaryExpr([&](Scalar) { return dist(rng); });
  }
  layer.biases.setZero();
}

/// Builds a seeded MLP through `dims` (input, hidden..., output). Hidden layers
/// use `hidden`, the last layer uses `output`.
template <typename Scalar = double>
Mlp<Scalar> make_mlp(std::span<const Index> dims, Activation hidden, Activation output, Rng& rng) {
  if (dims.size() < 2) throw ShapeError("make_mlp: need at least input and output dims");
  Mlp<Scalar> mlp;
  for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
    if (dims[k] < 1 || dims[k + 1] < 1) throw ShapeError("make_mlp: dimensions must be positive");
    auto act = (k + 2 == dims.size()) ? output : hidden;
    auto layer = DenseLayer<Scalar>::zeros(dims[k], dims[k + 1], act);
    initialize(layer, rng);
    mlp.layers.push_back(std::move(layer));
  }
  return mlp;
}

}  // namespace fetl
