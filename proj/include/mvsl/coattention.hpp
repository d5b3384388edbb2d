#pragma once

// Segment-level co-attention across views. Each sample's view is cut into
// fixed-width segments; affinities between the embedded segments of two
// views drive attention weights that pool each view into a shared code.

#include <span>
#include <utility>
#include <vector>

#include "mvsl/mlp.hpp"

namespace mvsl {

// Segmentation geometry of one view: k segments of width d.
struct SegmentationSpec {
  Index k = 1;
  Index d = 1;
};

// One sample's view cut into k segments of width d: column j holds features
// [j*d, (j+1)*d), zero-padded past the end of the flat vector.
struct SegmentedView {
  Matrix segments;  // d x k
  Index pad_count = 0;
  int view = 0;
};

// Cuts a flat feature vector into k segments of width d. Throws
// ArgumentError when k*d cannot hold every feature.
SegmentedView segment(const Vector& x, Index k, Index d, int view = 0);

// M = Q(segments): the per-segment embedder applied to all k segments at
// once (segments are columns). An identity embedder returns the raw
// segments mounted as a constant.
Var embed_segments(Tape& t, const SegmentedView& view, Mlp& embedder);

// C = tanh(M1^T W12 M2); every entry lies strictly inside (-1, 1).
Var affinity(Tape& t, Var M1, Var M2, Var W12);

// H1 = tanh(W1 M1 + (W2 M2) C^T),  H2 = tanh(W2 M2 + (W1 M1) C).
std::pair<Var, Var> coattend(Tape& t, Var M1, Var M2, Var C, Var W1, Var W2);

// a = softmax(wh H): one weight per segment, a 1 x k simplex.
Var attend_weights(Tape& t, Var H, Var wh);

// z = E(M a^T): attention-weighted segment pool pushed through the view
// encoder; returns an h x 1 column.
Var encode_view(Tape& t, Var M, Var a, Mlp& encoder);

// Index of the pair (i, k) with i < k in lexicographic pair order.
std::size_t pair_index(std::size_t i, std::size_t k, std::size_t v);

// v-view generalization: Ms[i] is view i's embedded segment matrix, proj[i]
// its projection into the shared attention space, and pairwise[pair_index(i,k,v)]
// the affinity weights for i < k (the reverse direction reuses the
// transpose). Returns one H_i per view. For v == 2 the outputs are bitwise
// identical to coattend. Throws ConfigError for fewer than two views.
std::vector<Var> multiview_coattend(Tape& t, std::span<const Var> Ms,
                                    std::span<const Var> proj,
                                    std::span<const Var> pairwise);

}  // namespace mvsl
