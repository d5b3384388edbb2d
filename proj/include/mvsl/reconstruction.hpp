#pragma once

// Decoding shared codes back to view space, the gamma-weighted
// cross-reconstruction objective, residual view-specific features, and the
// v-view centroid variant.

#include <span>
#include <utility>
#include <vector>

#include "mvsl/mlp.hpp"

namespace mvsl {

// Mixing pair on the 1-simplex parameterized by a single logit, so the two
// weights sum to exactly 1 after every optimizer step by construction.
struct GammaSimplex {
  ParamNode logit;  // 1x1

  GammaSimplex() : logit("gamma.logit", Matrix::Zero(1, 1)) {}
  explicit GammaSimplex(double initial_logit)
      : logit("gamma.logit", Matrix::Constant(1, 1, initial_logit)) {}

  double weight1() const;  // sigmoid(logit), value-level convenience
};

// (gamma1, gamma2) as 1x1 nodes: gamma1 = sigmoid(theta), gamma2 = 1 - gamma1.
// Both flow gradients into the logit.
std::pair<Var, Var> gamma_values(Tape& t, GammaSimplex& g);

// x_hat = F(z): decode codes (columns are samples) back to a view.
Var decode(Tape& t, Var z, Mlp& decoder);

// Reconstruction of view i from view j's code, for both views.
struct CrossRecons {
  Var r11, r12;  // view 1 from code 1 / code 2
  Var r21, r22;  // view 2 from code 1 / code 2
};

// Minibatch mean of
//   g1^3 |x1-r11|^2 + g2^3 |x2-r22|^2 + g1 g2^2 |x1-r12|^2 + g2 g1^2 |x2-r21|^2.
// Columns are samples; norms are squared Frobenius norms per sample.
Var cross_recon_loss(Tape& t, Var x1, Var x2, const CrossRecons& r, Var gamma1,
                     Var gamma2);

// s = x - gamma1*recon_from_code1 - gamma2*recon_from_code2. By default the
// classifier's gradient flows through the blended reconstruction back into
// decoders and encoders; `stop_blend_gradient` severs that path so the
// residual acts as a constant offset of x (ablation switch).
Var residual(Tape& t, Var x, Var recon_from_code1, Var recon_from_code2, Var gamma1,
             Var gamma2, bool stop_blend_gradient = false);

// v-view objective:
//   (1/v) sum_i E|x1 - F1(z_i)|^2  +  (1/v) sum_i E|x_i - F_i(z_i)|^2
// (squared norms; uniform weights). Throws ConfigError for v < 2.
Var centroid_recon_loss(Tape& t, std::span<const Var> views,
                        std::span<const Var> codes,
                        std::span<Mlp* const> decoders);

}  // namespace mvsl
