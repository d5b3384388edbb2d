#pragma once

// Label-vector metrics: accuracy, per-class precision/recall/F1, macro-F1,
// and the confusion matrix.

#include <span>
#include <vector>

#include "mvsl/common.hpp"

namespace mvsl {

struct MetricReport {
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  std::vector<double> precision;  // per class
  std::vector<double> recall;
  std::vector<double> f1;
  Matrix confusion;                 // classes x classes, rows are the truth
  std::vector<int> absent_classes;  // classes with no true and no predicted
                                    // sample; their F1 counts as zero
};

double accuracy(std::span<const int> truth, std::span<const int> predicted);

// Unweighted mean of per-class F1 over all `classes` classes; a class with
// zero precision+recall (including one absent from both vectors) scores 0.
double macro_f1(std::span<const int> truth, std::span<const int> predicted,
                int classes);

MetricReport evaluate_predictions(std::span<const int> truth,
                                  std::span<const int> predicted, int classes);

}  // namespace mvsl
