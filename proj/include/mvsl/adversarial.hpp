#pragma once

// View-discrimination game played in code space: a discriminator guesses
// which view's encoder produced a shared code, while the encoders are
// trained to make the two code distributions indistinguishable.

#include <span>
#include <vector>

#include "mvsl/mlp.hpp"

namespace mvsl {

// Probability clamp applied to discriminator outputs before any log.
constexpr double kProbFloor = 1e-7;

struct Discriminator {
  Mlp net;  // affine trunk ending in a 1-wide linear head

  Discriminator() = default;
  // Three affine layers (in -> hidden -> hidden -> 1) with tanh between.
  Discriminator(Index in, Index hidden, Rng& rng)
      : net("disc", {in, hidden, hidden, 1}, Activation::Linear, rng) {}

  std::vector<ParamNode*> params() { return net.params(); }
};

// D(z): per-column probability that the code came from view 1's encoder.
// Returns a 1 x B row clamped to [kProbFloor, 1 - kProbFloor].
Var discriminate(Tape& t, Var z, Discriminator& d);

struct AdversarialTerms {
  Var total;       // E[log D(z1)] + E[log(1 - D(z2))]
  Var view1_term;  // E[log D(z1)]
  Var view2_term;  // E[log(1 - D(z2))]
};

// Minibatch objective of the game (columns are samples). The discriminator
// ascends it, the encoders descend it. Throws ArgumentError on empty input.
AdversarialTerms adversarial_loss(Tape& t, Var z1, Var z2, Discriminator& d);

// Encoder-side alternative whose gradient does not vanish when the
// discriminator is confident: -E[log(1 - D(z1))] - E[log D(z2)], to be
// minimized by the encoders only.
Var non_saturating_encoder_loss(Tape& t, Var z1, Var z2, Discriminator& d);

// v-view objective: E[log D(z1)] + (1/(v-1)) * sum_{i>=2} E[log(1 - D(zi))].
// For v == 2 the value is bitwise identical to adversarial_loss().total.
Var centroid_adversarial_loss(Tape& t, std::span<const Var> codes, Discriminator& d);

// Maximizer of  a*log(c) + b*log(1-c)  over c in (0, 1) for positive a, b;
// the stationary balance point of the discriminator at fixed code
// distributions with densities a and b.
double optimal_discriminator(double p1_density, double p2_density);

}  // namespace mvsl
