#pragma once

// The full multi-view subspace model: per-view segment embedders, the
// co-attention stack, view encoders sharing a code space, a view
// discriminator playing a min-max game against the encoders, per-view
// decoders for gamma-weighted cross-reconstruction, residual view-specific
// features, and a classifier over the fused representation.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <vector>

#include "mvsl/adversarial.hpp"
#include "mvsl/classification.hpp"
#include "mvsl/coattention.hpp"
#include "mvsl/datagen.hpp"
#include "mvsl/mlp.hpp"
#include "mvsl/reconstruction.hpp"

namespace mvsl {

// How the classifier input is assembled. SharedPlusResidual concatenates
// the mean code with every view's residual features; SharedCopied tiles the
// mean code alone up to the same width (control for the residual channel).
enum class FusionMode { SharedPlusResidual, SharedCopied };

// Which reconstruction objective the autoencoder phase minimizes.
enum class ReconKind {
  Full,          // gamma-weighted same-view + cross-view reconstruction
  SameView,      // |x1 - F1(z1)|^2 + |x2 - F2(z2)|^2 only
  CrossView,     // |x1 - F1(z2)|^2 + |x2 - F2(z1)|^2 only
  CodeAlignment  // L1 distance |z1 - z2| in code space, no decoders
};

struct ModelConfig {
  int views = 2;
  std::vector<SegmentationSpec> segs;  // per-view segmentation geometry
  int classes = 2;
  Index code_dim = 100;        // width of the shared code space
  Index attention_dim = 64;    // width of the co-attention space
  Index embed_hidden = 0;      // segment embedder hidden width, 0 = segment width
  Index encoder_hidden = 64;
  Index decoder_hidden = 64;
  Index disc_hidden = 64;
  Index classifier_hidden = 128;
  bool per_view_heads = false;  // adds the two semi-supervised heads

  Index view_width(int i) const { return segs[static_cast<std::size_t>(i)].d *
                                         segs[static_cast<std::size_t>(i)].k; }
  Index fused_width() const;
  void validate() const;
};

// Segmentation and class count taken from the dataset, widths left at their
// defaults.
ModelConfig default_model_config(const MultiViewDataset& ds);

// One minibatch in tape-ready layout: per view a (d_i*k_i) x B matrix of
// zero-padded feature columns plus the per-sample segment matrices, and the
// labels as one-hot columns.
struct BatchData {
  std::vector<Matrix> flat;                        // per view
  std::vector<std::vector<SegmentedView>> pieces;  // [view][sample]
  Matrix y_cols;                                   // classes x B
  std::vector<bool> labeled;                       // per-sample flags

  Index batch_size() const { return flat.empty() ? 0 : flat[0].cols(); }
};

BatchData make_batch(const MultiViewDataset& ds, std::span<const Index> rows);

// Which parts of the graph a forward pass must build.
struct ForwardPlan {
  bool adversarial = true;      // game value l0
  bool reconstruction = true;   // lv
  bool classifier = true;       // fused probabilities and lc
  bool non_saturating = false;  // also build the encoder-side surrogate
  bool stop_grad_residual = false;
  bool squared_error = false;       // squared error instead of cross-entropy
  bool semi_supervised = false;     // two-head objective over partial labels
  bool freeze_classifier_input = false;  // cut gradients below the classifier
  bool want_attention = false;
  FusionMode fusion = FusionMode::SharedPlusResidual;
  ReconKind recon = ReconKind::Full;
};

struct ForwardResult {
  std::vector<Var> codes;        // per view, code_dim x B
  Var l0;                        // adversarial game value
  Var encoder_objective;         // non-saturating encoder surrogate
  Var lv;                        // reconstruction objective
  Var lc;                        // classification objective
  Var fused;                     // classifier input columns
  Var probs;                     // classes x B
  std::vector<Var> head_inputs;  // per-view head inputs (semi-supervised)
  std::vector<Var> head_probs;   // per-view heads (semi-supervised)
  std::vector<Matrix> attention; // per view, k_i x B attention weights
};

class MultiViewModel {
 public:
  MultiViewModel(ModelConfig cfg, std::uint64_t seed);
  MultiViewModel(const MultiViewModel&) = delete;
  MultiViewModel& operator=(const MultiViewModel&) = delete;

  const ModelConfig& config() const { return cfg_; }

  ForwardResult forward(Tape& t, const BatchData& batch, const ForwardPlan& plan);

  // Parameter groups for the three training phases. Pointers stay valid for
  // the model's lifetime.
  std::vector<ParamNode*> discriminator_params();
  std::vector<ParamNode*> autoencoder_params();  // embedders, attention,
                                                 // encoders, decoders, gamma
  std::vector<ParamNode*> classifier_params();
  std::vector<ParamNode*> all_params();

  Discriminator& discriminator() { return disc_; }
  GammaSimplex& gamma() { return gamma_; }
  Mlp& classifier() { return classifier_; }
  Mlp& head(int view) { return heads_.at(static_cast<std::size_t>(view)); }
  Mlp& decoder(int view) { return nets_[static_cast<std::size_t>(view)].decode; }

  void save(const std::filesystem::path& file) const;
  static std::unique_ptr<MultiViewModel> load(const std::filesystem::path& file);

 private:
  struct ViewNets {
    Mlp embed;             // segment embedder
    ParamNode attn_proj;   // attention_dim x d_i
    ParamNode attn_score;  // 1 x attention_dim
    Mlp encode;
    Mlp decode;
  };

  ModelConfig cfg_;
  std::vector<ViewNets> nets_;
  std::vector<ParamNode> pair_weights_;  // affinity weights, pair_index order
  Discriminator disc_;
  GammaSimplex gamma_;
  Mlp classifier_;
  std::vector<Mlp> heads_;  // per-view heads when cfg_.per_view_heads
};

// Class-probability rows for dataset rows [row_begin, row_end), computed in
// chunks on throwaway tapes.
Matrix predict_probabilities(MultiViewModel& m, const MultiViewDataset& ds,
                             Index row_begin, Index row_end,
                             FusionMode fusion = FusionMode::SharedPlusResidual,
                             bool semi_supervised = false, Index chunk = 256);

// Mean shared code (code_dim x rows) for dataset rows [row_begin, row_end).
Matrix shared_codes(MultiViewModel& m, const MultiViewDataset& ds,
                    Index row_begin, Index row_end, Index chunk = 256);

}  // namespace mvsl
