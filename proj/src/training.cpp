#include "mvsl/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include "mvsl/csv.hpp"
#include "mvsl/metrics.hpp"

namespace mvsl {
namespace {

double finite_or_throw(Var v, const std::string& term, const std::string& phase) {
  const double x = v.value()(0, 0);
  if (!std::isfinite(x))
    throw EvalError(term + " became non-finite during the " + phase + " phase");
  return x;
}

void zero_grads(std::span<ParamNode* const> params) {
  for (ParamNode* p : params) p->zero_grad();
}

ForwardPlan base_plan(const TrainingConfig& cfg) {
  ForwardPlan plan;
  plan.stop_grad_residual = cfg.stop_grad_residual;
  plan.squared_error = cfg.squared_error_classifier;
  plan.semi_supervised = cfg.semi_supervised;
  plan.fusion = cfg.fusion;
  plan.recon = cfg.recon;
  return plan;
}

}  // namespace

void TrainingConfig::validate() const {
  if (iterations < 0) throw ConfigError("training: iterations must be >= 0");
  if (t1 < 1 || t2 < 1 || t3 < 1)
    throw ConfigError("training: phase step counts t1, t2, t3 must be >= 1");
  if (!(alpha > 0.0) || !(beta > 0.0))
    throw ConfigError("training: alpha and beta must be positive");
  if (!(lr0 > 0.0)) throw ConfigError("training: lr0 must be positive");
  if (!(decay > 0.0) || decay > 1.0)
    throw ConfigError("training: decay must lie in (0, 1]");
  if (!(momentum >= 0.0) || momentum >= 1.0)
    throw ConfigError("training: momentum must lie in [0, 1)");
  if (batch_size < 1) throw ConfigError("training: batch_size must be >= 1");
  if (eval_every < 0) throw ConfigError("training: eval_every must be >= 0");
  if (!(labeled_fraction > 0.0) || labeled_fraction > 1.0)
    throw ConfigError("training: labeled_fraction must lie in (0, 1]");
}

double lr_schedule(const TrainingConfig& cfg, Index epoch) {
  if (epoch < 0) throw ArgumentError("lr_schedule: negative epoch");
  return cfg.lr0 * std::pow(cfg.decay, static_cast<double>(epoch));
}

std::vector<Index> epoch_order(std::uint64_t seed, Index epoch, Index n) {
  if (n < 1) throw ArgumentError("epoch_order: need at least one sample");
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  Rng rng = Rng(seed).split("order").split(static_cast<std::uint64_t>(epoch));
  rng.shuffle(order);
  return order;
}

void MomentumSgd::step(std::span<ParamNode* const> params, double lr) {
  for (ParamNode* p : params) {
    if (!p->gradient.allFinite())
      throw EvalError("gradient for '" + p->name + "' became non-finite");
    Matrix& v = velocity_.try_emplace(p, Matrix::Zero(p->value.rows(), p->value.cols()))
                    .first->second;
    v = momentum_ * v - lr * p->gradient;
    p->value += v;
  }
}

void step_discriminator(MultiViewModel& m, const BatchData& batch,
                        const TrainingConfig& cfg, MomentumSgd& opt, double lr) {
  ForwardPlan plan = base_plan(cfg);
  plan.adversarial = true;
  plan.reconstruction = false;
  plan.classifier = false;
  plan.semi_supervised = false;
  const auto params = m.discriminator_params();
  for (int u = 0; u < cfg.t1; ++u) {
    Tape t;
    ForwardResult r = m.forward(t, batch, plan);
    finite_or_throw(r.l0, "the adversarial objective", "discriminator");
    zero_grads(params);
    t.backward(neg(r.l0));  // gradient ascent on the game value
    opt.step(params, lr);
  }
}

void step_autoencoders(MultiViewModel& m, const BatchData& batch,
                       const TrainingConfig& cfg, MomentumSgd& opt, double lr) {
  ForwardPlan plan = base_plan(cfg);
  plan.adversarial = !cfg.non_saturating;
  plan.non_saturating = cfg.non_saturating;
  plan.reconstruction = cfg.alpha != 0.0;
  plan.classifier = cfg.beta != 0.0;  // frozen classifier still routes gradients
  const auto params = m.autoencoder_params();
  for (int u = 0; u < cfg.t2; ++u) {
    Tape t;
    ForwardResult r = m.forward(t, batch, plan);
    Var total = cfg.non_saturating ? r.encoder_objective : r.l0;
    finite_or_throw(total, "the adversarial objective", "autoencoder");
    if (plan.reconstruction) {
      finite_or_throw(r.lv, "the reconstruction objective", "autoencoder");
      total = add(total, scale(r.lv, cfg.alpha));
    }
    if (plan.classifier) {
      finite_or_throw(r.lc, "the classification objective", "autoencoder");
      total = add(total, scale(r.lc, cfg.beta));
    }
    zero_grads(params);
    t.backward(total);
    opt.step(params, lr);
  }
}

void step_classifier(MultiViewModel& m, const BatchData& batch,
                     const TrainingConfig& cfg, MomentumSgd& opt, double lr) {
  if (!cfg.semi_supervised) {
    const bool any_labeled =
        batch.labeled.empty() ||
        std::any_of(batch.labeled.begin(), batch.labeled.end(),
                    [](bool b) { return b; });
    if (!any_labeled)
      throw ArgumentError(
          "classifier phase: batch has no labeled samples in supervised mode");
  }

  // The features feeding the classifier are frozen during this phase, so
  // compute them once and run the inner updates on a classifier-only graph.
  ForwardPlan plan = base_plan(cfg);
  plan.adversarial = false;
  plan.reconstruction = false;
  plan.classifier = true;
  plan.freeze_classifier_input = true;

  Matrix fused_vals;
  std::vector<Matrix> head_vals;
  {
    Tape t;
    ForwardResult r = m.forward(t, batch, plan);
    if (cfg.semi_supervised)
      for (const Var& h : r.head_inputs) head_vals.push_back(h.value());
    else
      fused_vals = r.fused.value();
  }

  std::vector<bool> labeled = batch.labeled;
  if (labeled.empty())
    labeled.assign(static_cast<std::size_t>(batch.batch_size()), true);

  const auto params = m.classifier_params();
  for (int u = 0; u < cfg.t3; ++u) {
    Tape t;
    Var lc;
    if (cfg.semi_supervised) {
      Var p0 = classify_probs(t, t.constant(head_vals[0]), m.head(0));
      Var p1 = classify_probs(t, t.constant(head_vals[1]), m.head(1));
      lc = semisup_loss(t, p0, p1, batch.y_cols, labeled);
    } else {
      Var probs = classify_probs(t, t.constant(fused_vals), m.classifier());
      lc = cfg.squared_error_classifier
               ? squared_error_loss(t, probs, batch.y_cols)
               : cross_entropy_loss(t, probs, batch.y_cols);
    }
    finite_or_throw(lc, "the classification objective", "classifier");
    zero_grads(params);
    t.backward(lc);
    opt.step(params, lr);
  }
}

LossBreakdown evaluate_losses(MultiViewModel& m, const BatchData& batch,
                              const TrainingConfig& cfg) {
  ForwardPlan plan = base_plan(cfg);
  plan.adversarial = true;
  plan.reconstruction = true;
  plan.classifier = true;
  Tape t;
  ForwardResult r = m.forward(t, batch, plan);
  LossBreakdown lb;
  lb.l0 = r.l0.value()(0, 0);
  lb.lv = r.lv.value()(0, 0);
  lb.lc = r.lc.value()(0, 0);
  lb.total = lb.l0 + cfg.alpha * lb.lv + cfg.beta * lb.lc;
  return lb;
}

void TrainHistory::save_csv(const std::filesystem::path& file) const {
  std::ofstream out(file);
  if (!out) throw IoError(file.string() + ": cannot open for writing");
  out << "iteration,L0,Lv,Lc,total,lr,accuracy,f1\n";
  for (const auto& row : rows) {
    out << row.iteration << ',' << format_double(row.loss.l0) << ','
        << format_double(row.loss.lv) << ',' << format_double(row.loss.lc) << ','
        << format_double(row.loss.total) << ',' << format_double(row.lr) << ',';
    if (row.has_metrics)
      out << format_double(row.accuracy) << ',' << format_double(row.macro_f1);
    else
      out << ',';
    out << '\n';
  }
  if (!out) throw IoError(file.string() + ": write failed");
}

TrainResult train(const ModelConfig& model_cfg, const TrainingConfig& cfg,
                  const MultiViewDataset& ds) {
  model_cfg.validate();
  cfg.validate();
  ds.validate();
  if (model_cfg.views != static_cast<int>(ds.views.size()))
    throw ConfigError("train: model expects " + std::to_string(model_cfg.views) +
                      " views, dataset has " + std::to_string(ds.views.size()));
  for (int i = 0; i < model_cfg.views; ++i) {
    const auto& ms = model_cfg.segs[static_cast<std::size_t>(i)];
    const auto& dsg = ds.segs[static_cast<std::size_t>(i)];
    if (ms.k != dsg.k || ms.d != dsg.d)
      throw ConfigError("train: segmentation of view " + std::to_string(i + 1) +
                        " disagrees between model and dataset");
  }
  if (model_cfg.classes != ds.classes)
    throw ConfigError("train: model classes disagree with the dataset");
  if (cfg.semi_supervised && !model_cfg.per_view_heads)
    throw ConfigError("train: the two-head objective needs per_view_heads");

  // The train split must actually pose a classification problem.
  std::set<int> train_classes;
  for (Index i = 0; i < ds.n_train; ++i)
    train_classes.insert(ds.labels[static_cast<std::size_t>(i)]);
  if (train_classes.size() < 2)
    throw ArgumentError("train: train split contains fewer than two classes");

  TrainResult out;
  out.model = std::make_unique<MultiViewModel>(
      model_cfg, Rng(cfg.seed).split("init").root());

  const Index n_train = ds.n_train;
  const Index B = std::min<Index>(cfg.batch_size, n_train);
  const Index batches_per_epoch = (n_train + B - 1) / B;

  // Fixed labeled subset for the semi-supervised objective.
  std::vector<bool> labeled_mask;
  if (cfg.semi_supervised) {
    labeled_mask.assign(static_cast<std::size_t>(n_train), false);
    std::vector<Index> perm(static_cast<std::size_t>(n_train));
    std::iota(perm.begin(), perm.end(), Index{0});
    Rng rng = Rng(cfg.seed).split("labeled");
    rng.shuffle(perm);
    const Index n_labeled = std::clamp<Index>(
        static_cast<Index>(std::llround(cfg.labeled_fraction *
                                        static_cast<double>(n_train))),
        1, n_train);
    for (Index i = 0; i < n_labeled; ++i)
      labeled_mask[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])] = true;
  }

  MomentumSgd opt_disc(cfg.momentum);
  MomentumSgd opt_auto(cfg.momentum);
  MomentumSgd opt_clf(cfg.momentum);

  std::vector<int> test_truth;
  for (Index i = ds.n_train; i < ds.n(); ++i)
    test_truth.push_back(ds.labels[static_cast<std::size_t>(i)]);

  std::vector<Index> order;
  out.history.rows.reserve(static_cast<std::size_t>(cfg.iterations));
  for (Index it = 0; it < cfg.iterations; ++it) {
    const Index epoch = it / batches_per_epoch;
    const Index slot = it % batches_per_epoch;
    if (slot == 0) order = epoch_order(cfg.seed, epoch, n_train);
    const Index lo = slot * B;
    const Index hi = std::min<Index>(n_train, lo + B);
    const std::span<const Index> rows(order.data() + lo,
                                      static_cast<std::size_t>(hi - lo));
    const double lr = lr_schedule(cfg, epoch);

    BatchData batch = make_batch(ds, rows);
    if (cfg.semi_supervised)
      for (Index b = 0; b < hi - lo; ++b)
        batch.labeled[static_cast<std::size_t>(b)] =
            labeled_mask[static_cast<std::size_t>(rows[static_cast<std::size_t>(b)])];

    HistoryRow row;
    row.iteration = it + 1;
    row.lr = lr;
    try {
      step_discriminator(*out.model, batch, cfg, opt_disc, lr);
      step_autoencoders(*out.model, batch, cfg, opt_auto, lr);
      step_classifier(*out.model, batch, cfg, opt_clf, lr);
      row.loss = evaluate_losses(*out.model, batch, cfg);
    } catch (const EvalError& e) {
      out.status = TrainStatus::Diverged;
      out.divergence_note = e.what();
      break;
    }

    const bool want_metrics =
        !test_truth.empty() && cfg.eval_every > 0 &&
        ((it + 1) % cfg.eval_every == 0 || it + 1 == cfg.iterations);
    if (want_metrics) {
      const Matrix probs =
          predict_probabilities(*out.model, ds, ds.n_train, ds.n(), cfg.fusion,
                                cfg.semi_supervised);
      const Prediction pred = to_prediction(probs.transpose());
      row.has_metrics = true;
      row.accuracy = accuracy(test_truth, pred.labels);
      row.macro_f1 = macro_f1(test_truth, pred.labels, ds.classes);
    }

    out.history.rows.push_back(row);
    if (!std::isfinite(row.loss.total)) {
      out.status = TrainStatus::Diverged;
      out.divergence_note = "the total objective became non-finite";
      break;
    }
  }
  return out;
}

}  // namespace mvsl
