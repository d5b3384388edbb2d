#include "mvsl/reconstruction.hpp"

#include <cmath>

namespace mvsl {

double GammaSimplex::weight1() const {
  const double x = logit.value(0, 0);
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

std::pair<Var, Var> gamma_values(Tape& t, GammaSimplex& g) {
  Var g1 = sigmoid_map(t.param(g.logit));
  Var g2 = sub(t.constant(Matrix::Ones(1, 1)), g1);
  return {g1, g2};
}

Var decode(Tape& t, Var z, Mlp& decoder) {
  if (!decoder.identity() && decoder.in_dim() != z.rows()) {
    throw ShapeError("decode: codes " + shape_str(z.value()) +
                     " do not match decoder input width " +
                     std::to_string(decoder.in_dim()));
  }
  return decoder.apply(t, z);
}

namespace {

void require_matching(const char* op, Var x, Var r) {
  if (x.rows() != r.rows() || x.cols() != r.cols()) {
    throw ShapeError(std::string(op) + ": view " + shape_str(x.value()) +
                     " and reconstruction " + shape_str(r.value()) + " differ");
  }
}

// s * a for two 1x1 coefficient nodes.
Var coeff_mul(Var a, Var b) { return mul_scalar(a, b); }

}  // namespace

Var cross_recon_loss(Tape& t, Var x1, Var x2, const CrossRecons& r, Var gamma1,
                     Var gamma2) {
  (void)t;
  require_matching("cross_recon_loss", x1, r.r11);
  require_matching("cross_recon_loss", x1, r.r12);
  require_matching("cross_recon_loss", x2, r.r21);
  require_matching("cross_recon_loss", x2, r.r22);
  if (x1.cols() != x2.cols()) {
    throw ShapeError("cross_recon_loss: batch sizes differ: " +
                     shape_str(x1.value()) + " vs " + shape_str(x2.value()));
  }
  if (x1.cols() == 0) {
    throw ArgumentError("cross_recon_loss: empty batch");
  }

  Var g1sq = coeff_mul(gamma1, gamma1);
  Var g2sq = coeff_mul(gamma2, gamma2);
  Var c11 = coeff_mul(g1sq, gamma1);   // g1^3
  Var c22 = coeff_mul(g2sq, gamma2);   // g2^3
  Var c12 = coeff_mul(g2sq, gamma1);   // g1 * g2^2
  Var c21 = coeff_mul(g1sq, gamma2);   // g2 * g1^2

  Var t11 = mul_scalar(squared_frobenius(sub(x1, r.r11)), c11);
  Var t22 = mul_scalar(squared_frobenius(sub(x2, r.r22)), c22);
  Var t12 = mul_scalar(squared_frobenius(sub(x1, r.r12)), c12);
  Var t21 = mul_scalar(squared_frobenius(sub(x2, r.r21)), c21);

  Var total = add(add(t11, t22), add(t12, t21));
  return scale(total, 1.0 / static_cast<double>(x1.cols()));
}

Var residual(Tape& t, Var x, Var recon_from_code1, Var recon_from_code2, Var gamma1,
             Var gamma2, bool stop_blend_gradient) {
  (void)t;
  require_matching("residual", x, recon_from_code1);
  require_matching("residual", x, recon_from_code2);
  Var blend = add(mul_scalar(recon_from_code1, gamma1),
                  mul_scalar(recon_from_code2, gamma2));
  if (stop_blend_gradient) {
    blend = stop_gradient(blend);
  }
  return sub(x, blend);
}

Var centroid_recon_loss(Tape& t, std::span<const Var> views,
                        std::span<const Var> codes,
                        std::span<Mlp* const> decoders) {
  const std::size_t v = views.size();
  if (v < 2) {
    throw ConfigError("centroid_recon_loss: need at least two views");
  }
  if (codes.size() != v || decoders.size() != v) {
    throw ArgumentError("centroid_recon_loss: got " + std::to_string(views.size()) +
                        " views, " + std::to_string(codes.size()) + " codes, " +
                        std::to_string(decoders.size()) + " decoders");
  }
  const Index batch = views[0].cols();
  if (batch == 0) {
    throw ArgumentError("centroid_recon_loss: empty batch");
  }

  // Decode every code with view 1's decoder and with its own view's decoder;
  // the i = 0 reconstruction is shared by both sums.
  Var to_first_sum, own_sum;
  for (std::size_t i = 0; i < v; ++i) {
    Var to_first = decode(t, codes[i], *decoders[0]);
    require_matching("centroid_recon_loss", views[0], to_first);
    Var term1 = squared_frobenius(sub(views[0], to_first));
    to_first_sum = (i == 0) ? term1 : add(to_first_sum, term1);

    if (i == 0) {
      own_sum = term1;  // view 1 reconstructed by its own decoder, shared term
      continue;
    }
    Var own = decode(t, codes[i], *decoders[i]);
    require_matching("centroid_recon_loss", views[i], own);
    own_sum = add(own_sum, squared_frobenius(sub(views[i], own)));
  }
  Var total = add(to_first_sum, own_sum);
  return scale(total, 1.0 / (static_cast<double>(v) * static_cast<double>(batch)));
}

}  // namespace mvsl
