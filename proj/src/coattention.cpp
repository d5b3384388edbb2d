#include "mvsl/coattention.hpp"

namespace mvsl {

SegmentedView segment(const Vector& x, Index k, Index d, int view) {
  if (k < 1 || d < 1) {
    throw ArgumentError("segment: k and d must be positive");
  }
  if (k * d < x.size()) {
    throw ArgumentError("segment: k*d = " + std::to_string(k * d) +
                        " cannot hold " + std::to_string(x.size()) + " features");
  }
  SegmentedView out;
  out.view = view;
  out.pad_count = k * d - x.size();
  out.segments = Matrix::Zero(d, k);
  // Column-major fill: segment j takes features [j*d, (j+1)*d).
  for (Index i = 0; i < x.size(); ++i) {
    out.segments(i % d, i / d) = x(i);
  }
  return out;
}

Var embed_segments(Tape& t, const SegmentedView& view, Mlp& embedder) {
  Var raw = t.constant(view.segments);
  if (!embedder.identity() && embedder.in_dim() != view.segments.rows()) {
    throw ShapeError("embed_segments: embedder expects input width " +
                     std::to_string(embedder.in_dim()) + ", segments are " +
                     shape_str(view.segments));
  }
  return embedder.apply(t, raw);
}

Var affinity(Tape& t, Var M1, Var M2, Var W12) {
  (void)t;
  if (W12.rows() != M1.rows() || W12.cols() != M2.rows()) {
    throw ShapeError("affinity: weights " + shape_str(W12.value()) +
                     " do not bridge segment matrices " + shape_str(M1.value()) +
                     " and " + shape_str(M2.value()));
  }
  return tanh_map(matmul(matmul(transpose(M1), W12), M2));
}

std::pair<Var, Var> coattend(Tape& t, Var M1, Var M2, Var C, Var W1, Var W2) {
  (void)t;
  if (W1.cols() != M1.rows() || W2.cols() != M2.rows() || W1.rows() != W2.rows()) {
    throw ShapeError("coattend: projections " + shape_str(W1.value()) + ", " +
                     shape_str(W2.value()) + " do not match segment matrices " +
                     shape_str(M1.value()) + ", " + shape_str(M2.value()));
  }
  if (C.rows() != M1.cols() || C.cols() != M2.cols()) {
    throw ShapeError("coattend: affinity " + shape_str(C.value()) +
                     " does not pair " + std::to_string(M1.cols()) + " with " +
                     std::to_string(M2.cols()) + " segments");
  }
  Var wm1 = matmul(W1, M1);
  Var wm2 = matmul(W2, M2);
  Var h1 = tanh_map(add(wm1, matmul(wm2, transpose(C))));
  Var h2 = tanh_map(add(wm2, matmul(wm1, C)));
  return {h1, h2};
}

Var attend_weights(Tape& t, Var H, Var wh) {
  (void)t;
  if (wh.rows() != 1 || wh.cols() != H.rows()) {
    throw ShapeError("attend_weights: scorer " + shape_str(wh.value()) +
                     " does not match attention features " + shape_str(H.value()));
  }
  return softmax_map(matmul(wh, H));
}

Var encode_view(Tape& t, Var M, Var a, Mlp& encoder) {
  if (a.rows() != 1 || a.cols() != M.cols()) {
    throw ShapeError("encode_view: weights " + shape_str(a.value()) +
                     " do not match segments " + shape_str(M.value()));
  }
  Var pooled = matmul(M, transpose(a));
  return encoder.apply(t, pooled);
}

std::size_t pair_index(std::size_t i, std::size_t k, std::size_t v) {
  if (i >= k || k >= v) {
    throw ArgumentError("pair_index: need i < k < v");
  }
  return i * v - i * (i + 1) / 2 + (k - i - 1);
}

std::vector<Var> multiview_coattend(Tape& t, std::span<const Var> Ms,
                                    std::span<const Var> proj,
                                    std::span<const Var> pairwise) {
  const std::size_t v = Ms.size();
  if (v < 2) {
    throw ConfigError("multiview_coattend: need at least two views");
  }
  if (proj.size() != v) {
    throw ArgumentError("multiview_coattend: got " + std::to_string(proj.size()) +
                        " projections for " + std::to_string(v) + " views");
  }
  if (pairwise.size() != v * (v - 1) / 2) {
    throw ArgumentError("multiview_coattend: got " + std::to_string(pairwise.size()) +
                        " pairwise weights, expected " +
                        std::to_string(v * (v - 1) / 2));
  }

  std::vector<Var> wm(v);
  for (std::size_t i = 0; i < v; ++i) {
    wm[i] = matmul(proj[i], Ms[i]);
  }

  // Affinities for i < k; the reverse direction is the transpose.
  std::vector<Var> aff(pairwise.size());
  for (std::size_t i = 0; i < v; ++i) {
    for (std::size_t k = i + 1; k < v; ++k) {
      const std::size_t pi = pair_index(i, k, v);
      aff[pi] = affinity(t, Ms[i], Ms[k], pairwise[pi]);
    }
  }

  std::vector<Var> hs(v);
  for (std::size_t i = 0; i < v; ++i) {
    Var acc = wm[i];
    for (std::size_t k = 0; k < v; ++k) {
      if (k == i) continue;
      Var term = (i < k) ? matmul(wm[k], transpose(aff[pair_index(i, k, v)]))
                         : matmul(wm[k], aff[pair_index(k, i, v)]);
      acc = add(acc, term);
    }
    hs[i] = tanh_map(acc);
  }
  return hs;
}

}  // namespace mvsl
