#pragma once

// Experiment harness: held-out evaluation, attention export, the
// fusion-ablation and reconstruction-regularizer comparisons (error curves
// over training checkpoints, all variants sharing initialization, batch
// schedule and evaluation protocol), hyper-parameter sweeps, and a
// concatenated-views MLP baseline.

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "mvsl/metrics.hpp"
#include "mvsl/training.hpp"

namespace mvsl {

enum class Split { Train, Test, All };

// [begin, end) dataset rows of a split.
std::pair<Index, Index> split_range(const MultiViewDataset& ds, Split split);

Prediction predict_split(MultiViewModel& m, const MultiViewDataset& ds, Split split,
                         FusionMode fusion = FusionMode::SharedPlusResidual,
                         bool semi_supervised = false);

MetricReport evaluate_model(MultiViewModel& m, const MultiViewDataset& ds,
                            Split split,
                            FusionMode fusion = FusionMode::SharedPlusResidual,
                            bool semi_supervised = false);

// Key-value dump of the scalar metrics and per-class rows.
void save_metric_report(const MetricReport& rep, const std::filesystem::path& file);

// One row per (sample, view, segment): sample_id,view,segment_index,weight,padded.
// Weights of one sample's view sum to one; padded marks segments that cover
// zero-padded positions.
void export_attention(MultiViewModel& m, const MultiViewDataset& ds, Split split,
                      const std::filesystem::path& file);

struct CurvePoint {
  double x = 0.0;      // iteration count or swept parameter value
  double error = 0.0;  // held-out error rate, 1 - accuracy
};

struct CurveSeries {
  std::string name;
  std::vector<CurvePoint> points;
};

struct CurveSet {
  std::vector<CurveSeries> series;
  // Columns: series,x,error.
  void save_csv(const std::filesystem::path& file) const;
};

// Smallest x whose error is <= threshold; +infinity when never reached.
double first_reaching(const CurveSeries& s, double threshold);

struct SuiteConfig {
  ModelConfig model;
  TrainingConfig training;
  Index checkpoint_every = 500;  // evaluation cadence in outer iterations
  Index posthoc_steps = 200;     // probe-classifier fit steps per checkpoint
  Index posthoc_hidden = 64;
  double posthoc_lr = 0.1;
  void validate() const;
};

// Fusion ablation: identical training twice, once fusing mean code with the
// per-view residuals and once tiling the mean code to the same width.
// Series: "shared_plus_residual", "shared_copied".
CurveSet run_ablation(const SuiteConfig& sc, const MultiViewDataset& ds);

// Reconstruction-regularizer comparison. All variants share initialization
// and minibatch schedule and are scored by the same frozen-code probe (a
// fresh two-layer classifier fitted on the mean code at every checkpoint),
// so the curves coincide at iteration zero. Series, in order:
//   same_view    - same-view reconstruction, no labels
//   cross_view   - cross-view reconstruction, no labels
//   full_recon   - weighted same+cross reconstruction, no labels
//   code_l1      - L1 code alignment, no labels
//   full_labels  - weighted reconstruction plus the classifier phase
CurveSet run_regularizer_suite(const SuiteConfig& sc, const MultiViewDataset& ds);

// Final held-out error as a function of one knob. Supported names: t1, t2,
// t3, h (code width), alpha, beta. Anything else throws ArgumentError.
CurveSet run_sweep(const std::string& parameter, std::span<const double> values,
                   const SuiteConfig& sc, const MultiViewDataset& ds);

// Plain MLP on the concatenated raw views, trained with the same optimizer
// and schedule as the main model; returns held-out metrics.
struct BaselineConfig {
  std::vector<Index> hidden = {128, 64};
  TrainingConfig training;
};
MetricReport train_fcl_baseline(const BaselineConfig& cfg, const MultiViewDataset& ds);

}  // namespace mvsl
