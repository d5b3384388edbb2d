#pragma once

// Three-phase alternating optimization of the min-max objective
//   min_{G,F,C} max_D  L0 + alpha * Lv + beta * Lc
// with momentum SGD and a per-epoch exponential learning-rate decay. Each
// outer iteration draws one minibatch and runs, in order: t1 discriminator
// ascent steps on L0, t2 autoencoder descent steps on the full objective
// (classifier frozen), and t3 classifier descent steps on Lc (features
// frozen). Every phase keeps its own momentum buffers.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "mvsl/model.hpp"

namespace mvsl {

struct TrainingConfig {
  Index iterations = 0;  // outer iterations
  int t1 = 2;            // discriminator steps per iteration
  int t2 = 2;            // autoencoder steps per iteration
  int t3 = 3;            // classifier steps per iteration
  double alpha = 1.0;    // reconstruction weight
  double beta = 1.0;     // classification weight
  double lr0 = 0.03;
  double decay = 0.96;   // per-epoch multiplicative decay
  double momentum = 0.9;
  Index batch_size = 64;
  std::uint64_t seed = 0;
  Index eval_every = 0;  // held-out metric cadence; 0 = never during training

  bool non_saturating = false;        // encoder-side surrogate in phase two
  bool stop_grad_residual = false;
  bool squared_error_classifier = false;
  bool semi_supervised = false;
  double labeled_fraction = 1.0;      // of the train split, semi-supervised
  FusionMode fusion = FusionMode::SharedPlusResidual;
  ReconKind recon = ReconKind::Full;  // phase-two reconstruction objective

  void validate() const;
};

struct LossBreakdown {
  double l0 = 0.0;
  double lv = 0.0;
  double lc = 0.0;
  double total = 0.0;  // l0 + alpha*lv + beta*lc
};

struct HistoryRow {
  Index iteration = 0;  // 1-based outer iteration
  LossBreakdown loss;
  double lr = 0.0;
  bool has_metrics = false;
  double accuracy = 0.0;
  double macro_f1 = 0.0;
};

struct TrainHistory {
  std::vector<HistoryRow> rows;
  // Columns: iteration,L0,Lv,Lc,total,lr,accuracy,f1 (metrics blank when
  // the row carries none).
  void save_csv(const std::filesystem::path& file) const;
};

enum class TrainStatus { Ok, Diverged };

struct TrainResult {
  std::unique_ptr<MultiViewModel> model;
  TrainHistory history;
  TrainStatus status = TrainStatus::Ok;
  std::string divergence_note;  // empty unless status == Diverged
};

// lr0 * decay^epoch.
double lr_schedule(const TrainingConfig& cfg, Index epoch);

// Minibatch order for one epoch: pure function of (seed, epoch, n).
std::vector<Index> epoch_order(std::uint64_t seed, Index epoch, Index n);

class MomentumSgd {
 public:
  explicit MomentumSgd(double momentum) : momentum_(momentum) {}

  // v <- momentum*v - lr*grad; p <- p + v. Throws EvalError on a non-finite
  // gradient, naming the parameter.
  void step(std::span<ParamNode* const> params, double lr);

 private:
  double momentum_;
  std::unordered_map<ParamNode*, Matrix> velocity_;
};

// One phase on one fixed minibatch; each runs its configured number of
// inner updates, rebuilding the graph after every parameter change. Only
// the phase's own parameter group moves. Throws EvalError when the phase
// objective goes non-finite.
void step_discriminator(MultiViewModel& m, const BatchData& batch,
                        const TrainingConfig& cfg, MomentumSgd& opt, double lr);
void step_autoencoders(MultiViewModel& m, const BatchData& batch,
                       const TrainingConfig& cfg, MomentumSgd& opt, double lr);
void step_classifier(MultiViewModel& m, const BatchData& batch,
                     const TrainingConfig& cfg, MomentumSgd& opt, double lr);

// Value-only pass computing the logged breakdown on a batch.
LossBreakdown evaluate_losses(MultiViewModel& m, const BatchData& batch,
                              const TrainingConfig& cfg);

// Full run. Divergence (a non-finite objective or gradient) stops training
// and returns the history up to that point with status Diverged.
TrainResult train(const ModelConfig& model_cfg, const TrainingConfig& cfg,
                  const MultiViewDataset& ds);

}  // namespace mvsl
