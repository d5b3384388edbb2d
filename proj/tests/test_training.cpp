#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include "doctest.h"
#include "mvsl/datagen.hpp"
#include "mvsl/training.hpp"

using namespace mvsl;
namespace fs = std::filesystem;

namespace {

MultiViewDataset tiny_dataset() {
  DataGenConfig cfg;
  cfg.n = 40;
  cfg.base_dim = 12;
  cfg.classes = 2;
  cfg.informative_fraction = 0.5;
  cfg.noise_dim = 2;
  cfg.segments = 7;
  cfg.segment_width = 2;
  cfg.train_fraction = 0.75;
  cfg.seed = 99;
  return generate_dataset(cfg);
}

ModelConfig tiny_model(const MultiViewDataset& ds) {
  ModelConfig cfg = default_model_config(ds);
  cfg.code_dim = 6;
  cfg.attention_dim = 5;
  cfg.encoder_hidden = 8;
  cfg.decoder_hidden = 8;
  cfg.disc_hidden = 8;
  cfg.classifier_hidden = 10;
  return cfg;
}

TrainingConfig tiny_training() {
  TrainingConfig cfg;
  cfg.iterations = 3;
  cfg.batch_size = 10;
  cfg.lr0 = 0.02;
  cfg.seed = 5;
  return cfg;
}

BatchData first_batch(const MultiViewDataset& ds, Index n) {
  std::vector<Index> rows(static_cast<std::size_t>(n));
  std::iota(rows.begin(), rows.end(), Index{0});
  return make_batch(ds, rows);
}

std::vector<Matrix> snapshot(const std::vector<ParamNode*>& params) {
  std::vector<Matrix> vals;
  vals.reserve(params.size());
  for (const ParamNode* p : params) vals.push_back(p->value);
  return vals;
}

bool all_equal(const std::vector<ParamNode*>& params,
               const std::vector<Matrix>& vals) {
  for (std::size_t i = 0; i < params.size(); ++i)
    if (params[i]->value != vals[i]) return false;
  return true;
}

bool any_changed(const std::vector<ParamNode*>& params,
                 const std::vector<Matrix>& vals) {
  return !all_equal(params, vals);
}

}  // namespace

TEST_CASE("training configuration validation") {
  TrainingConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.t1 = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = TrainingConfig{};
  cfg.alpha = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = TrainingConfig{};
  cfg.beta = -1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = TrainingConfig{};
  cfg.decay = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = TrainingConfig{};
  cfg.decay = 1.5;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = TrainingConfig{};
  cfg.momentum = 1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = TrainingConfig{};
  cfg.lr0 = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = TrainingConfig{};
  cfg.batch_size = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = TrainingConfig{};
  cfg.labeled_fraction = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = TrainingConfig{};
  cfg.iterations = -1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("learning rate decays once per epoch") {
  TrainingConfig cfg;
  cfg.lr0 = 0.03;
  cfg.decay = 0.96;
  CHECK(lr_schedule(cfg, 0) == 0.03);
  CHECK(lr_schedule(cfg, 1) == doctest::Approx(0.0288).epsilon(1e-12));
  CHECK(lr_schedule(cfg, 2) == doctest::Approx(0.03 * 0.96 * 0.96).epsilon(1e-12));
  CHECK(lr_schedule(cfg, 50) ==
        doctest::Approx(0.03 * std::pow(0.96, 50)).epsilon(1e-12));
  CHECK_THROWS_AS(lr_schedule(cfg, -1), ArgumentError);
}

TEST_CASE("epoch order is a pure seeded permutation") {
  const auto a = epoch_order(9, 4, 20);
  const auto b = epoch_order(9, 4, 20);
  CHECK(a == b);
  const auto c = epoch_order(9, 5, 20);
  CHECK(a != c);
  const auto d = epoch_order(10, 4, 20);
  CHECK(a != d);

  std::vector<Index> sorted = a;
  std::sort(sorted.begin(), sorted.end());
  for (Index i = 0; i < 20; ++i) CHECK(sorted[static_cast<std::size_t>(i)] == i);
  CHECK_THROWS_AS(epoch_order(0, 0, 0), ArgumentError);
}

TEST_CASE("momentum update follows the classic recurrence") {
  ParamNode p("p", Matrix::Constant(1, 1, 2.0));
  MomentumSgd opt(0.9);
  std::vector<ParamNode*> params{&p};

  p.gradient.setConstant(0.5);
  opt.step(params, 0.1);
  double v = -0.1 * 0.5;
  double expect = 2.0 + v;
  CHECK(p.value(0, 0) == expect);

  p.gradient.setConstant(0.5);
  opt.step(params, 0.1);
  v = 0.9 * v - 0.1 * 0.5;
  expect += v;
  CHECK(p.value(0, 0) == expect);

  p.gradient.setConstant(std::numeric_limits<double>::quiet_NaN());
  CHECK_THROWS_AS(opt.step(params, 0.1), EvalError);
}

TEST_CASE("discriminator steps ascend the game value on a fixed batch") {
  const MultiViewDataset ds = tiny_dataset();
  MultiViewModel m(tiny_model(ds), 1);
  const BatchData batch = first_batch(ds, 12);
  TrainingConfig cfg = tiny_training();
  cfg.t1 = 5;

  const double before = evaluate_losses(m, batch, cfg).l0;
  MomentumSgd opt(cfg.momentum);
  step_discriminator(m, batch, cfg, opt, 0.005);
  const double after = evaluate_losses(m, batch, cfg).l0;
  CHECK(after >= before);
}

TEST_CASE("classifier steps descend the classification objective") {
  const MultiViewDataset ds = tiny_dataset();
  MultiViewModel m(tiny_model(ds), 2);
  const BatchData batch = first_batch(ds, 12);
  TrainingConfig cfg = tiny_training();
  cfg.t3 = 10;

  const double before = evaluate_losses(m, batch, cfg).lc;
  MomentumSgd opt(cfg.momentum);
  step_classifier(m, batch, cfg, opt, 0.05);
  const double after = evaluate_losses(m, batch, cfg).lc;
  CHECK(after < before);
}

TEST_CASE("one autoencoder step equals a monolithic gradient step") {
  const MultiViewDataset ds = tiny_dataset();
  const ModelConfig mc = tiny_model(ds);
  MultiViewModel a(mc, 3);
  MultiViewModel b(mc, 3);
  const BatchData batch = first_batch(ds, 8);
  TrainingConfig cfg = tiny_training();
  cfg.t2 = 1;
  cfg.alpha = 0.7;
  cfg.beta = 1.3;
  const double lr = 0.01;

  MomentumSgd opt(cfg.momentum);
  step_autoencoders(a, batch, cfg, opt, lr);

  {
    ForwardPlan plan;
    Tape t;
    const ForwardResult r = b.forward(t, batch, plan);
    const Var total = add(add(r.l0, scale(r.lv, cfg.alpha)), scale(r.lc, cfg.beta));
    for (ParamNode* p : b.autoencoder_params()) p->zero_grad();
    t.backward(total);
    for (ParamNode* p : b.autoencoder_params()) p->value -= lr * p->gradient;
  }

  auto pa = a.all_params(), pb = b.all_params();
  for (std::size_t i = 0; i < pa.size(); ++i) CHECK(pa[i]->value == pb[i]->value);
}

TEST_CASE("each phase moves only its own parameter group") {
  const MultiViewDataset ds = tiny_dataset();
  MultiViewModel m(tiny_model(ds), 4);
  const BatchData batch = first_batch(ds, 10);
  const TrainingConfig cfg = tiny_training();

  auto disc = m.discriminator_params();
  auto ae = m.autoencoder_params();
  auto clf = m.classifier_params();

  auto s_disc = snapshot(disc);
  auto s_ae = snapshot(ae);
  auto s_clf = snapshot(clf);

  MomentumSgd opt1(cfg.momentum);
  step_discriminator(m, batch, cfg, opt1, 0.02);
  CHECK(any_changed(disc, s_disc));
  CHECK(all_equal(ae, s_ae));
  CHECK(all_equal(clf, s_clf));

  s_disc = snapshot(disc);
  MomentumSgd opt2(cfg.momentum);
  step_autoencoders(m, batch, cfg, opt2, 0.02);
  CHECK(all_equal(disc, s_disc));
  CHECK(any_changed(ae, s_ae));
  CHECK(all_equal(clf, s_clf));

  s_ae = snapshot(ae);
  MomentumSgd opt3(cfg.momentum);
  step_classifier(m, batch, cfg, opt3, 0.02);
  CHECK(all_equal(disc, s_disc));
  CHECK(all_equal(ae, s_ae));
  CHECK(any_changed(clf, s_clf));
}

TEST_CASE("a saturated discriminator stops moving") {
  // Far-separated fixed codes drive the discriminator into its clamped
  // regime, where the sigmoid saturation makes further ascent steps tiny.
  Rng rng(0);
  Discriminator d(2, 8, rng);
  Matrix z1 = Matrix::Constant(2, 6, 8.0);
  Matrix z2 = Matrix::Constant(2, 6, -8.0);

  MomentumSgd opt(0.0);
  const auto params = d.params();
  for (int i = 0; i < 400; ++i) {
    Tape t;
    const auto terms = adversarial_loss(t, t.constant(z1), t.constant(z2), d);
    for (ParamNode* p : params) p->zero_grad();
    t.backward(neg(terms.total));
    opt.step(params, 0.5);
  }

  // The discriminator separates the two batches with >= 99.9% confidence on
  // both sides (measured game value after 400 steps: about -6.5e-4).
  {
    Tape t;
    const auto terms = adversarial_loss(t, t.constant(z1), t.constant(z2), d);
    CHECK(terms.total.value()(0, 0) > 2.0 * std::log(0.999));
  }

  const auto before = snapshot(params);
  {
    Tape t;
    const auto terms = adversarial_loss(t, t.constant(z1), t.constant(z2), d);
    for (ParamNode* p : params) p->zero_grad();
    t.backward(neg(terms.total));
    opt.step(params, 0.5);
  }
  double delta = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i)
    delta = std::max(delta, (params[i]->value - before[i]).lpNorm<Eigen::Infinity>());
  CHECK(delta < 1e-3);
}

TEST_CASE("logged breakdown recomposes from its parts") {
  const MultiViewDataset ds = tiny_dataset();
  MultiViewModel m(tiny_model(ds), 6);
  const BatchData batch = first_batch(ds, 10);
  TrainingConfig cfg = tiny_training();
  cfg.alpha = 0.9;
  cfg.beta = 1.1;
  const LossBreakdown lb = evaluate_losses(m, batch, cfg);
  CHECK(std::abs(lb.total - (lb.l0 + cfg.alpha * lb.lv + cfg.beta * lb.lc)) < 1e-10);
}

TEST_CASE("supervised classifier phase rejects a fully unlabeled batch") {
  const MultiViewDataset ds = tiny_dataset();
  MultiViewModel m(tiny_model(ds), 7);
  BatchData batch = first_batch(ds, 6);
  batch.labeled.assign(6, false);
  TrainingConfig cfg = tiny_training();
  MomentumSgd opt(cfg.momentum);
  CHECK_THROWS_AS(step_classifier(m, batch, cfg, opt, 0.01), ArgumentError);
}

TEST_CASE("training runs, logs every iteration and is deterministic") {
  const MultiViewDataset ds = tiny_dataset();
  const ModelConfig mc = tiny_model(ds);
  TrainingConfig cfg = tiny_training();
  cfg.iterations = 4;
  cfg.eval_every = 2;
  cfg.batch_size = 30;  // full train split: one batch per epoch

  TrainResult r1 = train(mc, cfg, ds);
  CHECK(r1.status == TrainStatus::Ok);
  REQUIRE(r1.history.rows.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) {
    const auto& row = r1.history.rows[i];
    CHECK(row.iteration == static_cast<Index>(i + 1));
    CHECK(std::isfinite(row.loss.total));
    CHECK(std::abs(row.loss.total -
                   (row.loss.l0 + cfg.alpha * row.loss.lv + cfg.beta * row.loss.lc)) <
          1e-10);
    // One batch per epoch: the rate decays every iteration.
    CHECK(row.lr == doctest::Approx(cfg.lr0 * std::pow(cfg.decay,
                                                       static_cast<double>(i)))
                        .epsilon(1e-12));
    CHECK(row.has_metrics == (i == 1 || i == 3));
    if (row.has_metrics) {
      CHECK(row.accuracy >= 0.0);
      CHECK(row.accuracy <= 1.0);
      CHECK(row.macro_f1 >= 0.0);
      CHECK(row.macro_f1 <= 1.0);
    }
  }

  TrainResult r2 = train(mc, cfg, ds);
  REQUIRE(r2.history.rows.size() == r1.history.rows.size());
  for (std::size_t i = 0; i < r1.history.rows.size(); ++i) {
    CHECK(r1.history.rows[i].loss.total == r2.history.rows[i].loss.total);
    CHECK(r1.history.rows[i].loss.l0 == r2.history.rows[i].loss.l0);
    CHECK(r1.history.rows[i].accuracy == r2.history.rows[i].accuracy);
  }
  auto p1 = r1.model->all_params(), p2 = r2.model->all_params();
  for (std::size_t i = 0; i < p1.size(); ++i) CHECK(p1[i]->value == p2[i]->value);
}

TEST_CASE("zero iterations returns the untouched initial model") {
  const MultiViewDataset ds = tiny_dataset();
  const ModelConfig mc = tiny_model(ds);
  TrainingConfig cfg = tiny_training();
  cfg.iterations = 0;

  TrainResult r = train(mc, cfg, ds);
  CHECK(r.status == TrainStatus::Ok);
  CHECK(r.history.rows.empty());

  MultiViewModel fresh(mc, Rng(cfg.seed).split("init").root());
  auto pa = r.model->all_params(), pb = fresh.all_params();
  for (std::size_t i = 0; i < pa.size(); ++i) CHECK(pa[i]->value == pb[i]->value);
}

TEST_CASE("divergence aborts while preserving the history") {
  const MultiViewDataset ds = tiny_dataset();
  const ModelConfig mc = tiny_model(ds);
  TrainingConfig cfg = tiny_training();
  cfg.iterations = 50;
  cfg.lr0 = 1e18;  // guaranteed blow-up

  const TrainResult r = train(mc, cfg, ds);
  CHECK(r.status == TrainStatus::Diverged);
  CHECK(!r.divergence_note.empty());
  CHECK(r.history.rows.size() < 50);
}

TEST_CASE("semi-supervised training runs with a partial label mask") {
  const MultiViewDataset ds = tiny_dataset();
  ModelConfig mc = tiny_model(ds);
  mc.per_view_heads = true;
  TrainingConfig cfg = tiny_training();
  cfg.iterations = 2;
  cfg.semi_supervised = true;
  cfg.labeled_fraction = 0.4;

  const TrainResult r = train(mc, cfg, ds);
  CHECK(r.status == TrainStatus::Ok);
  CHECK(r.history.rows.size() == 2);
  for (const auto& row : r.history.rows) CHECK(std::isfinite(row.loss.total));

  // Model without heads is rejected up front.
  ModelConfig no_heads = tiny_model(ds);
  CHECK_THROWS_AS(train(no_heads, cfg, ds), ConfigError);
}

TEST_CASE("training rejects inconsistent model/dataset pairs") {
  const MultiViewDataset ds = tiny_dataset();
  ModelConfig mc = tiny_model(ds);
  TrainingConfig cfg = tiny_training();

  ModelConfig bad = mc;
  bad.segs[0].k += 1;
  CHECK_THROWS_AS(train(bad, cfg, ds), ConfigError);

  bad = mc;
  bad.classes = 3;
  CHECK_THROWS_AS(train(bad, cfg, ds), ConfigError);

  // Single-class train split.
  MultiViewDataset mono = ds;
  for (Index i = 0; i < mono.n_train; ++i) mono.labels[static_cast<std::size_t>(i)] = 0;
  CHECK_THROWS_AS(train(mc, cfg, mono), ArgumentError);
}

TEST_CASE("history csv lists one row per iteration") {
  const fs::path file =
      fs::temp_directory_path() / ("mvsl_hist_" + std::to_string(::getpid()) + ".csv");
  TrainHistory h;
  HistoryRow a;
  a.iteration = 1;
  a.loss = {-1.25, 0.5, 0.75, -0.125};
  a.lr = 0.03;
  HistoryRow b = a;
  b.iteration = 2;
  b.has_metrics = true;
  b.accuracy = 0.875;
  b.macro_f1 = 0.8;
  h.rows = {a, b};
  h.save_csv(file);

  std::ifstream in(file);
  std::string line;
  std::getline(in, line);
  CHECK(line == "iteration,L0,Lv,Lc,total,lr,accuracy,f1");
  std::getline(in, line);
  CHECK(line == "1,-1.25,0.5,0.75,-0.125,0.029999999999999999,,");
  std::getline(in, line);
  CHECK(line == "2,-1.25,0.5,0.75,-0.125,0.029999999999999999,0.875,0.80000000000000004");
  CHECK(!std::getline(in, line));
  fs::remove(file);
}
