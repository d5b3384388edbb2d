#pragma once

// Fusing shared codes with view-specific residuals, the classifier head,
// cross-entropy, and the two-head semi-supervised objective.

#include <span>
#include <vector>

#include "mvsl/coattention.hpp"
#include "mvsl/mlp.hpp"

namespace mvsl {

struct Prediction {
  Matrix probabilities;    // n x c, one probability row per sample
  std::vector<int> labels;  // argmax per row, ties broken towards lower index
};

// n x c one-hot matrix from integer labels in [0, classes).
Matrix one_hot_rows(const std::vector<int>& labels, int classes);

// Throws ArgumentError unless every row is one-hot ({0,1} entries, sum 1).
void validate_label_matrix(const Matrix& y);

// Permutation mapping row-major positions of a d x k matrix to the
// column-major (feature-order) flat layout: out[p] = (p % k)*d + p / k.
std::vector<int> row_major_perm(const SegmentationSpec& seg);

// Fused feature columns: z_s over s1 over s2, where z_s = (z1 + z2)/2 and
// residuals arrive as (d_i*k_i) x B columns in feature order and are
// re-ordered row-major. Output is (h + d1*k1 + d2*k2) x B.
Var fuse(Tape& t, Var z1, Var z2, Var s1, Var s2, const SegmentationSpec& seg1,
         const SegmentationSpec& seg2);

// v-view fusion with z_s = (1/v) * sum_i z_i; bitwise equal to fuse at v=2.
// Throws ConfigError for fewer than two views.
Var centroid_fuse(Tape& t, std::span<const Var> codes,
                  std::span<const Var> residuals,
                  std::span<const SegmentationSpec> segs);

// Class probability columns (c x B): softmax over the classifier logits.
Var classify_probs(Tape& t, Var fused, Mlp& classifier);

// Collapses probability columns into per-sample rows plus argmax labels.
Prediction to_prediction(const Matrix& prob_cols);

Prediction classify(Tape& t, Var fused, Mlp& classifier);

// Mean over rows of -sum_k Y log(P) with P clamped to [1e-7, 1 - 1e-7].
// Y must be a valid one-hot label matrix (rows are samples).
double cross_entropy(const Matrix& y_rows, const Matrix& prob_rows);

// Same objective as a tape node over probability columns.
Var cross_entropy_loss(Tape& t, Var prob_cols, const Matrix& y_onehot_cols);

// Squared-error alternative: mean over columns of |Y - P|^2.
Var squared_error_loss(Tape& t, Var prob_cols, const Matrix& y_onehot_cols);

// Two-head objective: mean cross-entropy H(P1, P2) over unlabeled columns
// (P1 acting as the target distribution, both heads differentiable) plus
// the two supervised cross-entropies over labeled columns. With every
// column labeled this reduces to the two supervised terms. With no labeled
// column at all the objective degenerates to consistency alone; the
// function warns on stderr and sets *degenerate if provided.
Var semisup_loss(Tape& t, Var probs1, Var probs2, const Matrix& y_onehot_cols,
                 const std::vector<bool>& labeled, bool* degenerate = nullptr);

}  // namespace mvsl
