#include "mvsl/adversarial.hpp"

namespace mvsl {

namespace {

void require_batch(const char* op, Var z) {
  if (z.cols() == 0) {
    throw ArgumentError(std::string(op) + ": empty batch");
  }
}

}  // namespace

Var discriminate(Tape& t, Var z, Discriminator& d) {
  require_batch("discriminate", z);
  if (!d.net.identity() && d.net.in_dim() != z.rows()) {
    throw ShapeError("discriminate: codes " + shape_str(z.value()) +
                     " do not match discriminator input width " +
                     std::to_string(d.net.in_dim()));
  }
  Var logits = d.net.apply(t, z);
  return clamp(sigmoid_map(logits), kProbFloor, 1.0 - kProbFloor);
}

AdversarialTerms adversarial_loss(Tape& t, Var z1, Var z2, Discriminator& d) {
  require_batch("adversarial_loss", z1);
  require_batch("adversarial_loss", z2);
  Var p1 = discriminate(t, z1, d);
  Var p2 = discriminate(t, z2, d);
  Var ones = t.constant(Matrix::Ones(1, p2.cols()));
  Var t1 = mean_all(log_map(p1));
  Var t2 = mean_all(log_map(sub(ones, p2)));
  return AdversarialTerms{add(t1, t2), t1, t2};
}

Var non_saturating_encoder_loss(Tape& t, Var z1, Var z2, Discriminator& d) {
  require_batch("non_saturating_encoder_loss", z1);
  require_batch("non_saturating_encoder_loss", z2);
  Var p1 = discriminate(t, z1, d);
  Var p2 = discriminate(t, z2, d);
  Var ones = t.constant(Matrix::Ones(1, p1.cols()));
  Var t1 = mean_all(log_map(sub(ones, p1)));
  Var t2 = mean_all(log_map(p2));
  return neg(add(t1, t2));
}

Var centroid_adversarial_loss(Tape& t, std::span<const Var> codes, Discriminator& d) {
  const std::size_t v = codes.size();
  if (v < 2) {
    throw ConfigError("centroid_adversarial_loss: need at least two views");
  }
  for (const Var& z : codes) {
    require_batch("centroid_adversarial_loss", z);
  }
  Var t1 = mean_all(log_map(discriminate(t, codes[0], d)));
  Var rest;
  for (std::size_t i = 1; i < v; ++i) {
    Var pi = discriminate(t, codes[i], d);
    Var ones = t.constant(Matrix::Ones(1, pi.cols()));
    Var term = mean_all(log_map(sub(ones, pi)));
    rest = (i == 1) ? term : add(rest, term);
  }
  if (v > 2) {
    rest = scale(rest, 1.0 / static_cast<double>(v - 1));
  }
  return add(t1, rest);
}

double optimal_discriminator(double p1_density, double p2_density) {
  if (!(p1_density > 0.0) || !(p2_density > 0.0)) {
    throw ArgumentError("optimal_discriminator: densities must be positive");
  }
  return p1_density / (p1_density + p2_density);
}

}  // namespace mvsl
