#include "mvsl/classification.hpp"

#include <cmath>
#include <iostream>

namespace mvsl {

Matrix one_hot_rows(const std::vector<int>& labels, int classes) {
  if (classes < 2) {
    throw ArgumentError("one_hot_rows: need at least two classes");
  }
  Matrix y = Matrix::Zero(static_cast<Index>(labels.size()), classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= classes) {
      throw ArgumentError("one_hot_rows: label " + std::to_string(labels[i]) +
                          " outside [0, " + std::to_string(classes) + ")");
    }
    y(static_cast<Index>(i), labels[i]) = 1.0;
  }
  return y;
}

void validate_label_matrix(const Matrix& y) {
  for (Index i = 0; i < y.rows(); ++i) {
    double sum = 0.0;
    for (Index j = 0; j < y.cols(); ++j) {
      const double v = y(i, j);
      if (v != 0.0 && v != 1.0) {
        throw ArgumentError("label matrix: row " + std::to_string(i) +
                            " has entry " + std::to_string(v) + ", expected 0 or 1");
      }
      sum += v;
    }
    if (sum != 1.0) {
      throw ArgumentError("label matrix: row " + std::to_string(i) +
                          " is not one-hot (sum " + std::to_string(sum) + ")");
    }
  }
}

std::vector<int> row_major_perm(const SegmentationSpec& seg) {
  std::vector<int> perm(static_cast<std::size_t>(seg.k * seg.d));
  for (Index p = 0; p < seg.k * seg.d; ++p) {
    perm[static_cast<std::size_t>(p)] = static_cast<int>((p % seg.k) * seg.d + p / seg.k);
  }
  return perm;
}

Var centroid_fuse(Tape& t, std::span<const Var> codes,
                  std::span<const Var> residuals,
                  std::span<const SegmentationSpec> segs) {
  (void)t;
  const std::size_t v = codes.size();
  if (v < 2) {
    throw ConfigError("centroid_fuse: need at least two views");
  }
  if (residuals.size() != v || segs.size() != v) {
    throw ArgumentError("centroid_fuse: got " + std::to_string(codes.size()) +
                        " codes, " + std::to_string(residuals.size()) +
                        " residuals, " + std::to_string(segs.size()) + " specs");
  }
  const Index batch = codes[0].cols();
  for (std::size_t i = 0; i < v; ++i) {
    if (codes[i].rows() != codes[0].rows() || codes[i].cols() != batch) {
      throw ShapeError("centroid_fuse: code shapes differ: " +
                       shape_str(codes[0].value()) + " vs " +
                       shape_str(codes[i].value()));
    }
    if (residuals[i].rows() != segs[i].k * segs[i].d || residuals[i].cols() != batch) {
      throw ShapeError("centroid_fuse: residual " + shape_str(residuals[i].value()) +
                       " does not match segmentation " +
                       shape_str(segs[i].k * segs[i].d, batch));
    }
  }

  Var zs = codes[0];
  for (std::size_t i = 1; i < v; ++i) {
    zs = add(zs, codes[i]);
  }
  zs = scale(zs, 1.0 / static_cast<double>(v));

  std::vector<Var> parts;
  parts.reserve(v + 1);
  parts.push_back(zs);
  for (std::size_t i = 0; i < v; ++i) {
    parts.push_back(gather_rows(residuals[i], row_major_perm(segs[i])));
  }
  return concat_rows(std::span<const Var>(parts));
}

Var fuse(Tape& t, Var z1, Var z2, Var s1, Var s2, const SegmentationSpec& seg1,
         const SegmentationSpec& seg2) {
  std::vector<Var> codes{z1, z2};
  std::vector<Var> residuals{s1, s2};
  std::vector<SegmentationSpec> segs{seg1, seg2};
  return centroid_fuse(t, codes, residuals, segs);
}

Var classify_probs(Tape& t, Var fused, Mlp& classifier) {
  if (!classifier.identity() && classifier.in_dim() != fused.rows()) {
    throw ShapeError("classify: fused features " + shape_str(fused.value()) +
                     " do not match classifier input width " +
                     std::to_string(classifier.in_dim()));
  }
  return softmax_cols(classifier.apply(t, fused));
}

Prediction to_prediction(const Matrix& prob_cols) {
  if (prob_cols.cols() == 0) {
    throw ArgumentError("to_prediction: empty batch");
  }
  Prediction p;
  p.probabilities = prob_cols.transpose();
  p.labels.resize(static_cast<std::size_t>(prob_cols.cols()));
  for (Index j = 0; j < prob_cols.cols(); ++j) {
    int best = 0;
    for (Index k = 1; k < prob_cols.rows(); ++k) {
      if (prob_cols(k, j) > prob_cols(best, j)) {
        best = static_cast<int>(k);
      }
    }
    p.labels[static_cast<std::size_t>(j)] = best;
  }
  return p;
}

Prediction classify(Tape& t, Var fused, Mlp& classifier) {
  return to_prediction(classify_probs(t, fused, classifier).value());
}

double cross_entropy(const Matrix& y_rows, const Matrix& prob_rows) {
  if (y_rows.rows() != prob_rows.rows() || y_rows.cols() != prob_rows.cols()) {
    throw ShapeError("cross_entropy: labels " + shape_str(y_rows) +
                     " vs probabilities " + shape_str(prob_rows));
  }
  if (y_rows.rows() == 0) {
    throw ArgumentError("cross_entropy: empty batch");
  }
  validate_label_matrix(y_rows);
  double total = 0.0;
  for (Index i = 0; i < y_rows.rows(); ++i) {
    for (Index j = 0; j < y_rows.cols(); ++j) {
      if (y_rows(i, j) == 1.0) {
        double p = prob_rows(i, j);
        p = std::min(std::max(p, 1e-7), 1.0 - 1e-7);
        total -= std::log(p);
      }
    }
  }
  return total / static_cast<double>(y_rows.rows());
}

Var cross_entropy_loss(Tape& t, Var prob_cols, const Matrix& y_onehot_cols) {
  if (prob_cols.rows() != y_onehot_cols.rows() ||
      prob_cols.cols() != y_onehot_cols.cols()) {
    throw ShapeError("cross_entropy_loss: probabilities " +
                     shape_str(prob_cols.value()) + " vs labels " +
                     shape_str(y_onehot_cols));
  }
  if (prob_cols.cols() == 0) {
    throw ArgumentError("cross_entropy_loss: empty batch");
  }
  validate_label_matrix(y_onehot_cols.transpose());
  Var safe = clamp(prob_cols, 1e-7, 1.0 - 1e-7);
  Var picked = cmul(t.constant(y_onehot_cols), log_map(safe));
  return scale(sum_all(picked), -1.0 / static_cast<double>(prob_cols.cols()));
}

Var squared_error_loss(Tape& t, Var prob_cols, const Matrix& y_onehot_cols) {
  if (prob_cols.rows() != y_onehot_cols.rows() ||
      prob_cols.cols() != y_onehot_cols.cols()) {
    throw ShapeError("squared_error_loss: probabilities " +
                     shape_str(prob_cols.value()) + " vs labels " +
                     shape_str(y_onehot_cols));
  }
  if (prob_cols.cols() == 0) {
    throw ArgumentError("squared_error_loss: empty batch");
  }
  Var diff = sub(prob_cols, t.constant(y_onehot_cols));
  return scale(squared_frobenius(diff), 1.0 / static_cast<double>(prob_cols.cols()));
}

Var semisup_loss(Tape& t, Var probs1, Var probs2, const Matrix& y_onehot_cols,
                 const std::vector<bool>& labeled, bool* degenerate) {
  const Index batch = probs1.cols();
  if (probs2.cols() != batch || probs2.rows() != probs1.rows()) {
    throw ShapeError("semisup_loss: head outputs differ: " +
                     shape_str(probs1.value()) + " vs " + shape_str(probs2.value()));
  }
  if (batch == 0) {
    throw ArgumentError("semisup_loss: empty batch");
  }
  if (static_cast<Index>(labeled.size()) != batch) {
    throw ArgumentError("semisup_loss: mask covers " +
                        std::to_string(labeled.size()) + " of " +
                        std::to_string(batch) + " columns");
  }

  std::vector<int> lab, unlab;
  for (Index j = 0; j < batch; ++j) {
    (labeled[static_cast<std::size_t>(j)] ? lab : unlab).push_back(static_cast<int>(j));
  }

  if (degenerate != nullptr) {
    *degenerate = lab.empty();
  }
  if (lab.empty()) {
    std::cerr << "warning: semisup_loss has no labeled samples; the objective "
                 "degenerates to the consistency term alone\n";
  }

  Var total;
  bool have = false;
  if (!unlab.empty()) {
    Var p1u = select_cols(probs1, unlab);
    Var p2u = select_cols(probs2, unlab);
    Var safe2 = clamp(p2u, 1e-7, 1.0 - 1e-7);
    Var consistency = scale(sum_all(cmul(p1u, log_map(safe2))),
                            -1.0 / static_cast<double>(unlab.size()));
    total = consistency;
    have = true;
  }
  if (!lab.empty()) {
    Matrix y_lab(y_onehot_cols.rows(), static_cast<Index>(lab.size()));
    for (std::size_t c = 0; c < lab.size(); ++c) {
      y_lab.col(static_cast<Index>(c)) = y_onehot_cols.col(lab[c]);
    }
    Var sup1 = cross_entropy_loss(t, select_cols(probs1, lab), y_lab);
    Var sup2 = cross_entropy_loss(t, select_cols(probs2, lab), y_lab);
    Var sup = add(sup1, sup2);
    total = have ? add(total, sup) : sup;
    have = true;
  }
  return total;
}

}  // namespace mvsl
