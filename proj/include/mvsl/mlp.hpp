#pragma once

// Fully connected stacks used for the per-view embedders, encoders,
// decoders, the discriminator trunk and the classifier.

#include <string>
#include <vector>

#include "mvsl/rng.hpp"
#include "mvsl/tape.hpp"

namespace mvsl {

enum class Activation { Linear, Tanh, Sigmoid };

// Entries drawn from U(-r, r) with r = sqrt(6 / (fan_in + fan_out)).
Matrix glorot_uniform(Index rows, Index cols, Rng& rng);

struct DenseLayer {
  ParamNode weight;  // out x in
  ParamNode bias;    // out x 1, zero-initialized
};

// tanh between hidden layers, configurable output activation. An Mlp built
// with no layers is the identity map.
class Mlp {
 public:
  Mlp() = default;

  // dims = {in, hidden..., out}; needs at least two entries. Weights are
  // Glorot-uniform draws from `rng` in layer order, biases start at zero.
  Mlp(const std::string& name, const std::vector<Index>& dims, Activation out_act,
      Rng& rng);

  Var apply(Tape& t, Var x);

  bool identity() const { return layers_.empty(); }
  Index in_dim() const { return layers_.empty() ? -1 : layers_.front().weight.value.cols(); }
  Index out_dim() const { return layers_.empty() ? -1 : layers_.back().weight.value.rows(); }

  std::vector<ParamNode*> params();
  const std::vector<DenseLayer>& layers() const { return layers_; }
  Activation output_activation() const { return out_act_; }

 private:
  std::vector<DenseLayer> layers_;
  Activation out_act_ = Activation::Linear;
};

}  // namespace mvsl
