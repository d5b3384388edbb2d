#include "mvsl/mlp.hpp"

#include <cmath>

namespace mvsl {

Matrix glorot_uniform(Index rows, Index cols, Rng& rng) {
  const double r = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) {
      m(i, j) = rng.uniform(-r, r);
    }
  }
  return m;
}

Mlp::Mlp(const std::string& name, const std::vector<Index>& dims, Activation out_act,
         Rng& rng)
    : out_act_(out_act) {
  if (dims.size() < 2) {
    throw ConfigError("Mlp '" + name + "': need at least input and output dims");
  }
  for (Index d : dims) {
    if (d < 1) {
      throw ConfigError("Mlp '" + name + "': all layer widths must be positive");
    }
  }
  layers_.reserve(dims.size() - 1);
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const std::string tag = name + "." + std::to_string(l);
    DenseLayer layer{
        ParamNode(tag + ".W", glorot_uniform(dims[l + 1], dims[l], rng)),
        ParamNode(tag + ".b", Matrix::Zero(dims[l + 1], 1)),
    };
    layers_.push_back(std::move(layer));
  }
}

Var Mlp::apply(Tape& t, Var x) {
  Var h = x;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    Var W = t.param(layers_[l].weight);
    Var b = t.param(layers_[l].bias);
    h = linear_apply(W, h, &b);
    const bool last = (l + 1 == layers_.size());
    if (!last) {
      h = tanh_map(h);
    } else if (out_act_ == Activation::Tanh) {
      h = tanh_map(h);
    } else if (out_act_ == Activation::Sigmoid) {
      h = sigmoid_map(h);
    }
  }
  return h;
}

std::vector<ParamNode*> Mlp::params() {
  std::vector<ParamNode*> out;
  out.reserve(layers_.size() * 2);
  for (DenseLayer& l : layers_) {
    out.push_back(&l.weight);
    out.push_back(&l.bias);
  }
  return out;
}

}  // namespace mvsl
