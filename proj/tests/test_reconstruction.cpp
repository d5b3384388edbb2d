#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "mvsl/grad_check.hpp"
#include "mvsl/reconstruction.hpp"

using namespace mvsl;

namespace {

Matrix random_matrix(Index r, Index c, Rng& rng, double s = 1.0) {
  Matrix m(r, c);
  for (Index i = 0; i < r; ++i)
    for (Index j = 0; j < c; ++j) m(i, j) = rng.normal(0.0, s);
  return m;
}

}  // namespace

TEST_CASE("gamma pair lies on the simplex and sums to exactly one") {
  {
    GammaSimplex g(0.0);
    Tape t;
    auto [g1, g2] = gamma_values(t, g);
    CHECK(g1.value()(0, 0) == 0.5);
    CHECK(g2.value()(0, 0) == 0.5);
  }
  {
    GammaSimplex g(1.0);
    Tape t;
    auto [g1, g2] = gamma_values(t, g);
    CHECK(g1.value()(0, 0) == doctest::Approx(0.7310585786300049).epsilon(1e-14));
    CHECK(g2.value()(0, 0) == doctest::Approx(0.2689414213699951).epsilon(1e-14));
  }
  // Exact unit sum for arbitrary logits, including saturating ones. The
  // pair lives in the closed interval: for extremely negative logits the
  // sigmoid clamps to the smallest positive double and 1 - gamma1 rounds
  // to exactly 1, which the contract permits.
  Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    GammaSimplex g(rng.normal(0.0, 20.0));
    Tape t;
    auto [g1, g2] = gamma_values(t, g);
    const double a = g1.value()(0, 0), b = g2.value()(0, 0);
    CHECK(a + b == 1.0);
    CHECK(a >= 0.0);
    CHECK(a <= 1.0);
    CHECK(b >= 0.0);
    CHECK(b <= 1.0);
    CHECK(a > 0.0);  // the sigmoid output itself never collapses to 0
    CHECK(a < 1.0);
  }
}

TEST_CASE("decode maps codes through the decoder stack") {
  Rng rng(7);
  {
    Mlp f("f", {2, 4}, Activation::Linear, rng);
    for (ParamNode* p : f.params()) p->value.setZero();
    Tape t;
    Var out = decode(t, t.constant(Matrix::Ones(2, 3)), f);
    CHECK(out.value().norm() == 0.0);
  }
  {
    Mlp f("f", {3, 3}, Activation::Linear, rng);
    f.params()[0]->value = Matrix::Identity(3, 3);
    f.params()[1]->value.setZero();
    Tape t;
    Matrix z = random_matrix(3, 2, rng);
    Var out = decode(t, t.constant(z), f);
    CHECK((out.value() - z).norm() == 0.0);
  }
  {
    // Fixed small decoder against a hand forward pass.
    Mlp f("f", {2, 2}, Activation::Linear, rng);
    f.params()[0]->value << 1, 2, 3, 4;
    f.params()[1]->value << 0.5, -0.5;
    Tape t;
    Var out = decode(t, t.constant(Matrix::Ones(2, 1)), f);
    CHECK(out.value()(0, 0) == doctest::Approx(3.5).epsilon(1e-15));
    CHECK(out.value()(1, 0) == doctest::Approx(6.5).epsilon(1e-15));
    CHECK_THROWS_AS(decode(t, t.constant(Matrix::Ones(3, 1)), f), ShapeError);
  }
}

TEST_CASE("cross reconstruction loss reproduces hand arithmetic") {
  GammaSimplex g(0.0);  // gamma = (0.5, 0.5): all four coefficients are 1/8
  Tape t;
  auto [g1, g2] = gamma_values(t, g);

  Var x1 = t.constant(Matrix::Constant(1, 1, 1.0));
  Var x2 = t.constant(Matrix::Constant(1, 1, 2.0));
  Var zero = t.constant(Matrix::Zero(1, 1));
  CrossRecons r{zero, zero, zero, zero};
  Var lv = cross_recon_loss(t, x1, x2, r, g1, g2);
  CHECK(lv.value()(0, 0) == doctest::Approx(1.25).epsilon(1e-14));

  // Exact reconstructions drive the loss to zero.
  CrossRecons exact{x1, x1, x2, x2};
  Var lv0 = cross_recon_loss(t, x1, x2, exact, g1, g2);
  CHECK(lv0.value()(0, 0) == 0.0);

  Var bad = t.constant(Matrix::Zero(2, 1));
  CrossRecons mis{bad, zero, zero, zero};
  CHECK_THROWS_AS(cross_recon_loss(t, x1, x2, mis, g1, g2), ShapeError);
}

TEST_CASE("residual subtracts the blended reconstruction") {
  Tape t;
  Var g1 = t.constant(Matrix::Constant(1, 1, 0.5));
  Var g2 = t.constant(Matrix::Constant(1, 1, 0.5));
  Var x = t.constant((Matrix(2, 1) << 2.0, 2.0).finished());
  Var r1 = t.constant((Matrix(2, 1) << 1.0, 0.0).finished());
  Var r2 = t.constant((Matrix(2, 1) << 0.0, 1.0).finished());

  Var s = residual(t, x, r1, r2, g1, g2);
  CHECK(s.value()(0, 0) == doctest::Approx(1.5).epsilon(1e-15));
  CHECK(s.value()(1, 0) == doctest::Approx(1.5).epsilon(1e-15));

  // Perfect blended reconstruction leaves a zero residual.
  Var sz = residual(t, x, x, x, g1, g2);
  CHECK(sz.value().norm() == 0.0);

  // Vertex of the simplex ignores the second reconstruction entirely.
  Var one = t.constant(Matrix::Ones(1, 1));
  Var zero = t.constant(Matrix::Zero(1, 1));
  Var sv = residual(t, x, r1, r2, one, zero);
  CHECK((sv.value() - (x.value() - r1.value())).norm() == 0.0);
}

TEST_CASE("residual identity holds to machine precision on random data") {
  Rng rng(13);
  for (int trial = 0; trial < 50; ++trial) {
    GammaSimplex g(rng.normal(0.0, 2.0));
    Tape t;
    auto [g1, g2] = gamma_values(t, g);
    Matrix xv = random_matrix(6, 4, rng, 2.0);
    Var x = t.constant(xv);
    Var r1 = t.constant(random_matrix(6, 4, rng, 2.0));
    Var r2 = t.constant(random_matrix(6, 4, rng, 2.0));
    Var s = residual(t, x, r1, r2, g1, g2);

    Matrix rebuilt = s.value() + g1.value()(0, 0) * r1.value() +
                     g2.value()(0, 0) * r2.value();
    CHECK((rebuilt - xv).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("stop-gradient residual severs the blend path") {
  Rng rng(17);
  GammaSimplex g(0.3);
  ParamNode rpar("r", random_matrix(2, 2, rng));
  Tape t;
  auto [g1, g2] = gamma_values(t, g);
  Var x = t.constant(random_matrix(2, 2, rng));
  Var r1 = t.param(rpar);
  Var s = residual(t, x, r1, r1, g1, g2, /*stop_blend_gradient=*/true);
  t.backward(sum_all(s));
  CHECK(rpar.gradient.norm() == 0.0);
  CHECK(g.logit.gradient.norm() == 0.0);
}

TEST_CASE("blended two-term loss is bounded by twice the four-term loss") {
  Rng rng(23);
  for (int trial = 0; trial < 100; ++trial) {
    Rng r = rng.split(static_cast<std::uint64_t>(trial));
    const Index dim = 5, batch = 3;
    Matrix x1 = random_matrix(dim, batch, r, 2.0);
    Matrix x2 = random_matrix(dim, batch, r, 2.0);
    Matrix r11 = random_matrix(dim, batch, r, 2.0);
    Matrix r12 = random_matrix(dim, batch, r, 2.0);
    Matrix r21 = random_matrix(dim, batch, r, 2.0);
    Matrix r22 = random_matrix(dim, batch, r, 2.0);
    const double s1 = r.uniform(0.05, 0.95);
    const double s2 = 1.0 - s1;

    Matrix blend1 = s1 * r11 + s2 * r12;
    Matrix blend2 = s1 * r21 + s2 * r22;
    const double two_term =
        s1 * (x1 - blend1).squaredNorm() + s2 * (x2 - blend2).squaredNorm();
    const double four_term = s1 * s1 * s1 * (x1 - r11).squaredNorm() +
                             s2 * s2 * s2 * (x2 - r22).squaredNorm() +
                             s1 * s2 * s2 * (x1 - r12).squaredNorm() +
                             s2 * s1 * s1 * (x2 - r21).squaredNorm();
    CHECK(two_term <= 2.0 * four_term + 1e-9);
  }
}

TEST_CASE("three-view centroid loss matches hand-summed scalar terms") {
  Tape t;
  std::vector<Var> views{t.constant(Matrix::Constant(1, 1, 1.0)),
                         t.constant(Matrix::Constant(1, 1, 2.0)),
                         t.constant(Matrix::Constant(1, 1, 3.0))};
  std::vector<Var> codes{t.constant(Matrix::Constant(1, 1, 0.5)),
                         t.constant(Matrix::Constant(1, 1, 1.0)),
                         t.constant(Matrix::Constant(1, 1, 2.5))};
  Mlp id1, id2, id3;  // identity decoders
  std::vector<Mlp*> decs{&id1, &id2, &id3};

  Var lv = centroid_recon_loss(t, views, codes, decs);
  // to-first: (1-0.5)^2 + (1-1)^2 + (1-2.5)^2 = 2.5
  // own:      (1-0.5)^2 + (2-1)^2 + (3-2.5)^2 = 1.5
  CHECK(lv.value()(0, 0) == doctest::Approx(4.0 / 3.0).epsilon(1e-14));

  // Every term exact (identical views, codes equal to them) gives zero;
  // the objective includes cross terms against view 1, so distinct views
  // cannot all reconstruct exactly through identity decoders.
  std::vector<Var> same{views[1], views[1], views[1]};
  Var lv0 = centroid_recon_loss(t, same, same, decs);
  CHECK(lv0.value()(0, 0) == 0.0);

  std::vector<Var> one_view{views[0]};
  std::vector<Var> one_code{codes[0]};
  std::vector<Mlp*> one_dec{&id1};
  CHECK_THROWS_AS(centroid_recon_loss(t, one_view, one_code, one_dec), ConfigError);
}

TEST_CASE("two-view centroid loss follows its documented coefficient scheme") {
  Rng rng(31);
  const Index d = 4, b = 3, h = 2;
  Matrix x1v = random_matrix(d, b, rng), x2v = random_matrix(d, b, rng);
  Matrix z1v = random_matrix(h, b, rng), z2v = random_matrix(h, b, rng);
  Mlp f1("f1", {h, d}, Activation::Linear, rng);
  Mlp f2("f2", {h, d}, Activation::Linear, rng);

  Tape t;
  std::vector<Var> views{t.constant(x1v), t.constant(x2v)};
  std::vector<Var> codes{t.constant(z1v), t.constant(z2v)};
  std::vector<Mlp*> decs{&f1, &f2};
  Var lv = centroid_recon_loss(t, views, codes, decs);

  // Uniform-weight scheme over {r11 twice, r12 once, r22 once}.
  Matrix r11 = decode(t, codes[0], f1).value();
  Matrix r12 = decode(t, codes[1], f1).value();
  Matrix r22 = decode(t, codes[1], f2).value();
  const double expect = (2.0 * (x1v - r11).squaredNorm() + (x1v - r12).squaredNorm() +
                         (x2v - r22).squaredNorm()) /
                        (2.0 * static_cast<double>(b));
  CHECK(lv.value()(0, 0) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("reconstruction gradients verify numerically") {
  Rng rng(37);
  const Index h = 2, d = 3, b = 2;
  Mlp f1("f1", {h, 4, d}, Activation::Linear, rng);
  Mlp f2("f2", {h, 4, d}, Activation::Linear, rng);
  GammaSimplex g(0.4);
  ParamNode z1("z1", random_matrix(h, b, rng, 0.5));
  ParamNode z2("z2", random_matrix(h, b, rng, 0.5));
  Matrix x1 = random_matrix(d, b, rng), x2 = random_matrix(d, b, rng);

  std::vector<ParamNode*> params{&z1, &z2, &g.logit};
  for (ParamNode* p : f1.params()) params.push_back(p);
  for (ParamNode* p : f2.params()) params.push_back(p);

  const double err = grad_check(
      [&](Tape& t) {
        auto [g1, g2] = gamma_values(t, g);
        Var vz1 = t.param(z1), vz2 = t.param(z2);
        CrossRecons r{decode(t, vz1, f1), decode(t, vz2, f1), decode(t, vz1, f2),
                      decode(t, vz2, f2)};
        Var lv = cross_recon_loss(t, t.constant(x1), t.constant(x2), r, g1, g2);
        Var s1 = residual(t, t.constant(x1), r.r11, r.r12, g1, g2);
        return add(lv, mean_all(tanh_map(s1)));
      },
      params);
  CHECK(err < 1e-6);
}
