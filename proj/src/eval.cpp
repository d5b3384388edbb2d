#include "mvsl/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <utility>

#include "mvsl/csv.hpp"

namespace mvsl {
namespace {

std::vector<int> labels_in_range(const MultiViewDataset& ds, Index lo, Index hi) {
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(hi - lo));
  for (Index i = lo; i < hi; ++i)
    out.push_back(ds.labels[static_cast<std::size_t>(i)]);
  return out;
}

void require_test_split(const MultiViewDataset& ds, const std::string& who) {
  if (ds.n_test() < 1)
    throw ArgumentError(who + ": the dataset has no held-out rows");
}

void require_two_train_classes(const MultiViewDataset& ds, const std::string& who) {
  std::set<int> seen;
  for (Index i = 0; i < ds.n_train; ++i)
    seen.insert(ds.labels[static_cast<std::size_t>(i)]);
  if (seen.size() < 2)
    throw ArgumentError(who + ": train split contains fewer than two classes");
}

std::ofstream open_out(const std::filesystem::path& file) {
  std::ofstream out(file);
  if (!out) throw IoError(file.string() + ": cannot open for writing");
  return out;
}

// Held-out error of a fresh two-layer probe classifier fitted on the frozen
// mean codes. The probe draws its weights from `eval_seed` every time it is
// fitted, so identical codes give bitwise-identical errors.
double frozen_code_probe_error(MultiViewModel& m, const MultiViewDataset& ds,
                               const SuiteConfig& sc, std::uint64_t eval_seed,
                               const Matrix& y_train_cols,
                               std::span<const int> test_truth) {
  const Matrix z_train = shared_codes(m, ds, 0, ds.n_train);
  const Matrix z_test = shared_codes(m, ds, ds.n_train, ds.n());

  Rng rng(eval_seed);
  Mlp probe("posthoc", {m.config().code_dim, sc.posthoc_hidden,
                        static_cast<Index>(ds.classes)},
            Activation::Linear, rng);
  MomentumSgd opt(sc.training.momentum);
  const auto params = probe.params();
  for (Index step = 0; step < sc.posthoc_steps; ++step) {
    Tape t;
    const Var probs = classify_probs(t, t.constant(z_train), probe);
    const Var loss = cross_entropy_loss(t, probs, y_train_cols);
    if (!std::isfinite(loss.value()(0, 0)))
      throw EvalError("probe objective became non-finite");
    for (ParamNode* p : params) p->zero_grad();
    t.backward(loss);
    opt.step(params, sc.posthoc_lr);
  }

  Tape t;
  const Var probs = classify_probs(t, t.constant(z_test), probe);
  const Prediction pred = to_prediction(probs.value());
  return 1.0 - accuracy(test_truth, pred.labels);
}

}  // namespace

std::pair<Index, Index> split_range(const MultiViewDataset& ds, Split split) {
  switch (split) {
    case Split::Train: return {0, ds.n_train};
    case Split::Test: return {ds.n_train, ds.n()};
    case Split::All: return {0, ds.n()};
  }
  throw ArgumentError("split_range: unknown split");
}

Prediction predict_split(MultiViewModel& m, const MultiViewDataset& ds, Split split,
                         FusionMode fusion, bool semi_supervised) {
  const auto [lo, hi] = split_range(ds, split);
  if (hi <= lo) throw ArgumentError("predict_split: the selected split is empty");
  const Matrix probs =
      predict_probabilities(m, ds, lo, hi, fusion, semi_supervised);
  return to_prediction(probs.transpose());
}

MetricReport evaluate_model(MultiViewModel& m, const MultiViewDataset& ds,
                            Split split, FusionMode fusion, bool semi_supervised) {
  const auto [lo, hi] = split_range(ds, split);
  const Prediction pred = predict_split(m, ds, split, fusion, semi_supervised);
  const std::vector<int> truth = labels_in_range(ds, lo, hi);
  return evaluate_predictions(truth, pred.labels, ds.classes);
}

void save_metric_report(const MetricReport& rep, const std::filesystem::path& file) {
  KeyValues kv;
  kv.emplace_back("format", "mvsl-metrics-1");
  kv.emplace_back("classes", std::to_string(rep.f1.size()));
  kv.emplace_back("accuracy", format_double(rep.accuracy));
  kv.emplace_back("macro_f1", format_double(rep.macro_f1));
  for (std::size_t k = 0; k < rep.f1.size(); ++k) {
    const std::string id = std::to_string(k);
    kv.emplace_back("precision." + id, format_double(rep.precision[k]));
    kv.emplace_back("recall." + id, format_double(rep.recall[k]));
    kv.emplace_back("f1." + id, format_double(rep.f1[k]));
  }
  std::string absent;
  for (std::size_t i = 0; i < rep.absent_classes.size(); ++i) {
    if (i > 0) absent += ',';
    absent += std::to_string(rep.absent_classes[static_cast<std::size_t>(i)]);
  }
  kv.emplace_back("absent_classes", absent);
  save_key_values(kv, file);
}

void export_attention(MultiViewModel& m, const MultiViewDataset& ds, Split split,
                      const std::filesystem::path& file) {
  const auto [lo, hi] = split_range(ds, split);
  if (hi <= lo) throw ArgumentError("export_attention: the selected split is empty");

  auto out = open_out(file);
  out << "sample_id,view,segment_index,weight,padded\n";

  ForwardPlan plan;
  plan.adversarial = false;
  plan.reconstruction = false;
  plan.classifier = false;
  plan.want_attention = true;

  const Index chunk = 256;
  for (Index start = lo; start < hi; start += chunk) {
    const Index stop = std::min<Index>(hi, start + chunk);
    std::vector<Index> rows(static_cast<std::size_t>(stop - start));
    std::iota(rows.begin(), rows.end(), start);
    Tape t;
    const BatchData batch = make_batch(ds, rows);
    const ForwardResult r = m.forward(t, batch, plan);
    for (std::size_t v = 0; v < r.attention.size(); ++v) {
      const Matrix& a = r.attention[v];  // k x B
      const Index d = ds.segs[v].d;
      const Index width = ds.views[v].cols();
      for (Index c = 0; c < a.cols(); ++c) {
        const Index sample = rows[static_cast<std::size_t>(c)];
        for (Index j = 0; j < a.rows(); ++j) {
          const bool padded = (j + 1) * d > width;
          out << sample << ',' << (v + 1) << ',' << j << ','
              << format_double(a(j, c)) << ',' << (padded ? 1 : 0) << '\n';
        }
      }
    }
  }
  if (!out) throw IoError(file.string() + ": write failed");
}

void CurveSet::save_csv(const std::filesystem::path& file) const {
  auto out = open_out(file);
  out << "series,x,error\n";
  for (const auto& s : series) {
    if (s.name.empty() || s.name.find(',') != std::string::npos)
      throw ArgumentError("curve series name '" + s.name +
                          "' is empty or contains a comma");
    for (const auto& p : s.points)
      out << s.name << ',' << format_double(p.x) << ','
          << format_double(p.error) << '\n';
  }
  if (!out) throw IoError(file.string() + ": write failed");
}

double first_reaching(const CurveSeries& s, double threshold) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& p : s.points)
    if (p.error <= threshold) best = std::min(best, p.x);
  return best;
}

void SuiteConfig::validate() const {
  model.validate();
  training.validate();
  if (checkpoint_every < 1)
    throw ConfigError("suite: checkpoint_every must be >= 1");
  if (posthoc_steps < 1) throw ConfigError("suite: posthoc_steps must be >= 1");
  if (posthoc_hidden < 1) throw ConfigError("suite: posthoc_hidden must be >= 1");
  if (!(posthoc_lr > 0.0)) throw ConfigError("suite: posthoc_lr must be positive");
}

CurveSet run_ablation(const SuiteConfig& sc, const MultiViewDataset& ds) {
  sc.validate();
  ds.validate();
  require_test_split(ds, "ablation");
  require_two_train_classes(ds, "ablation");

  const std::vector<int> test_truth = labels_in_range(ds, ds.n_train, ds.n());
  const std::pair<std::string, FusionMode> arms[] = {
      {"shared_plus_residual", FusionMode::SharedPlusResidual},
      {"shared_copied", FusionMode::SharedCopied},
  };

  CurveSet out;
  for (const auto& [name, mode] : arms) {
    TrainingConfig tc = sc.training;
    tc.fusion = mode;
    tc.eval_every = sc.checkpoint_every;

    CurveSeries series;
    series.name = name;

    // Error of the untrained model, built exactly as train() builds it.
    {
      MultiViewModel fresh(sc.model, Rng(tc.seed).split("init").root());
      const Matrix probs = predict_probabilities(fresh, ds, ds.n_train, ds.n(),
                                                 mode, tc.semi_supervised);
      const Prediction pred = to_prediction(probs.transpose());
      series.points.push_back({0.0, 1.0 - accuracy(test_truth, pred.labels)});
    }

    const TrainResult res = train(sc.model, tc, ds);
    if (res.status == TrainStatus::Diverged)
      throw EvalError("ablation arm '" + name +
                      "' diverged: " + res.divergence_note);
    for (const auto& row : res.history.rows)
      if (row.has_metrics)
        series.points.push_back(
            {static_cast<double>(row.iteration), 1.0 - row.accuracy});
    out.series.push_back(std::move(series));
  }
  return out;
}

CurveSet run_regularizer_suite(const SuiteConfig& sc, const MultiViewDataset& ds) {
  sc.validate();
  ds.validate();
  require_test_split(ds, "regularizer suite");
  require_two_train_classes(ds, "regularizer suite");
  if (sc.training.semi_supervised)
    throw ConfigError(
        "regularizer suite: the comparison uses fully supervised training");

  const std::vector<int> test_truth = labels_in_range(ds, ds.n_train, ds.n());
  const std::vector<int> train_truth = labels_in_range(ds, 0, ds.n_train);
  const Matrix y_train_cols =
      one_hot_rows(train_truth, ds.classes).transpose();
  const std::uint64_t eval_seed = Rng(sc.training.seed).split("posthoc").root();

  struct Variant {
    std::string name;
    ReconKind kind;
    bool with_labels;
  };
  const Variant variants[] = {
      {"same_view", ReconKind::SameView, false},
      {"cross_view", ReconKind::CrossView, false},
      {"full_recon", ReconKind::Full, false},
      {"code_l1", ReconKind::CodeAlignment, false},
      {"full_labels", ReconKind::Full, true},
  };

  CurveSet out;
  for (const auto& variant : variants) {
    TrainingConfig tc = sc.training;
    tc.recon = variant.kind;
    if (!variant.with_labels) tc.beta = 0.0;  // drops the classifier subgraph

    MultiViewModel model(sc.model, Rng(tc.seed).split("init").root());
    MomentumSgd opt_disc(tc.momentum);
    MomentumSgd opt_auto(tc.momentum);
    MomentumSgd opt_clf(tc.momentum);

    CurveSeries series;
    series.name = variant.name;
    try {
      series.points.push_back({0.0, frozen_code_probe_error(
                                        model, ds, sc, eval_seed,
                                        y_train_cols, test_truth)});

      const Index n_train = ds.n_train;
      const Index B = std::min<Index>(tc.batch_size, n_train);
      const Index batches_per_epoch = (n_train + B - 1) / B;
      std::vector<Index> order;
      for (Index it = 0; it < tc.iterations; ++it) {
        const Index epoch = it / batches_per_epoch;
        const Index slot = it % batches_per_epoch;
        if (slot == 0) order = epoch_order(tc.seed, epoch, n_train);
        const Index lo = slot * B;
        const Index hi = std::min<Index>(n_train, lo + B);
        const std::span<const Index> rows(order.data() + lo,
                                          static_cast<std::size_t>(hi - lo));
        const double lr = lr_schedule(tc, epoch);

        const BatchData batch = make_batch(ds, rows);
        step_discriminator(model, batch, tc, opt_disc, lr);
        step_autoencoders(model, batch, tc, opt_auto, lr);
        if (variant.with_labels) step_classifier(model, batch, tc, opt_clf, lr);

        if ((it + 1) % sc.checkpoint_every == 0 || it + 1 == tc.iterations)
          series.points.push_back(
              {static_cast<double>(it + 1),
               frozen_code_probe_error(model, ds, sc, eval_seed, y_train_cols,
                                       test_truth)});
      }
    } catch (const EvalError& e) {
      throw EvalError("regularizer variant '" + variant.name +
                      "': " + e.what());
    }
    out.series.push_back(std::move(series));
  }
  return out;
}

CurveSet run_sweep(const std::string& parameter, std::span<const double> values,
                   const SuiteConfig& sc, const MultiViewDataset& ds) {
  sc.validate();
  ds.validate();
  require_test_split(ds, "sweep");
  if (values.empty()) throw ArgumentError("sweep: no values given");

  const bool integral = parameter == "t1" || parameter == "t2" ||
                        parameter == "t3" || parameter == "h";
  if (!integral && parameter != "alpha" && parameter != "beta")
    throw ArgumentError("sweep: unknown parameter '" + parameter +
                        "' (expected t1, t2, t3, h, alpha or beta)");

  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  for (const double v : sorted) {
    if (!std::isfinite(v))
      throw ArgumentError("sweep: values must be finite");
    if (integral && std::floor(v) != v)
      throw ArgumentError("sweep: '" + parameter + "' takes whole numbers");
  }

  CurveSeries series;
  series.name = parameter;
  for (const double v : sorted) {
    ModelConfig mc = sc.model;
    TrainingConfig tc = sc.training;
    if (parameter == "t1") tc.t1 = static_cast<int>(v);
    else if (parameter == "t2") tc.t2 = static_cast<int>(v);
    else if (parameter == "t3") tc.t3 = static_cast<int>(v);
    else if (parameter == "h") mc.code_dim = static_cast<Index>(v);
    else if (parameter == "alpha") tc.alpha = v;
    else tc.beta = v;

    const TrainResult res = train(mc, tc, ds);
    if (res.status == TrainStatus::Diverged)
      throw EvalError("sweep: " + parameter + "=" + format_double(v) +
                      " diverged: " + res.divergence_note);
    const MetricReport rep = evaluate_model(*res.model, ds, Split::Test,
                                            tc.fusion, tc.semi_supervised);
    series.points.push_back({v, 1.0 - rep.accuracy});
  }

  CurveSet out;
  out.series.push_back(std::move(series));
  return out;
}

MetricReport train_fcl_baseline(const BaselineConfig& cfg,
                                const MultiViewDataset& ds) {
  cfg.training.validate();
  ds.validate();
  require_test_split(ds, "baseline");
  require_two_train_classes(ds, "baseline");
  for (const Index h : cfg.hidden)
    if (h < 1) throw ConfigError("baseline: hidden widths must be >= 1");

  Index total_width = 0;
  for (const auto& view : ds.views) total_width += view.cols();
  Matrix x_rows(ds.n(), total_width);
  Index at = 0;
  for (const auto& view : ds.views) {
    x_rows.middleCols(at, view.cols()) = view;
    at += view.cols();
  }

  const std::vector<int> train_truth = labels_in_range(ds, 0, ds.n_train);
  const Matrix y_cols = one_hot_rows(train_truth, ds.classes).transpose();

  std::vector<Index> dims;
  dims.push_back(total_width);
  dims.insert(dims.end(), cfg.hidden.begin(), cfg.hidden.end());
  dims.push_back(static_cast<Index>(ds.classes));
  Rng init = Rng(cfg.training.seed).split("init");
  Mlp net("fcl", dims, Activation::Linear, init);
  MomentumSgd opt(cfg.training.momentum);
  const auto params = net.params();

  const Index n_train = ds.n_train;
  const Index B = std::min<Index>(cfg.training.batch_size, n_train);
  const Index batches_per_epoch = (n_train + B - 1) / B;
  std::vector<Index> order;
  for (Index it = 0; it < cfg.training.iterations; ++it) {
    const Index epoch = it / batches_per_epoch;
    const Index slot = it % batches_per_epoch;
    if (slot == 0) order = epoch_order(cfg.training.seed, epoch, n_train);
    const Index lo = slot * B;
    const Index hi = std::min<Index>(n_train, lo + B);

    Matrix xb(total_width, hi - lo);
    Matrix yb(ds.classes, hi - lo);
    for (Index b = 0; b < hi - lo; ++b) {
      const Index row = order[static_cast<std::size_t>(lo + b)];
      xb.col(b) = x_rows.row(row).transpose();
      yb.col(b) = y_cols.col(row);
    }

    Tape t;
    const Var probs = classify_probs(t, t.constant(xb), net);
    const Var loss = cross_entropy_loss(t, probs, yb);
    if (!std::isfinite(loss.value()(0, 0)))
      throw EvalError("baseline objective became non-finite");
    for (ParamNode* p : params) p->zero_grad();
    t.backward(loss);
    opt.step(params, lr_schedule(cfg.training, epoch));
  }

  std::vector<int> predicted;
  const Index chunk = 512;
  for (Index start = ds.n_train; start < ds.n(); start += chunk) {
    const Index stop = std::min<Index>(ds.n(), start + chunk);
    Tape t;
    const Var probs = classify_probs(
        t, t.constant(x_rows.middleRows(start, stop - start).transpose()), net);
    const Prediction pred = to_prediction(probs.value());
    predicted.insert(predicted.end(), pred.labels.begin(), pred.labels.end());
  }
  const std::vector<int> test_truth = labels_in_range(ds, ds.n_train, ds.n());
  return evaluate_predictions(test_truth, predicted, ds.classes);
}

}  // namespace mvsl
