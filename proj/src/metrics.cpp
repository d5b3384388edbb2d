#include "mvsl/metrics.hpp"

#include <string>

namespace mvsl {
namespace {

void check_inputs(std::span<const int> truth, std::span<const int> predicted,
                  int classes) {
  if (truth.empty()) throw ArgumentError("metrics: empty label vectors");
  if (truth.size() != predicted.size())
    throw ArgumentError("metrics: " + std::to_string(truth.size()) +
                        " true labels vs " + std::to_string(predicted.size()) +
                        " predictions");
  for (std::size_t i = 0; i < truth.size(); ++i) {
    for (int y : {truth[i], predicted[i]}) {
      if (y < 0 || y >= classes)
        throw ArgumentError("metrics: label " + std::to_string(y) +
                            " outside [0, " + std::to_string(classes) + ")");
    }
  }
}

}  // namespace

double accuracy(std::span<const int> truth, std::span<const int> predicted) {
  if (truth.empty()) throw ArgumentError("metrics: empty label vectors");
  if (truth.size() != predicted.size())
    throw ArgumentError("metrics: " + std::to_string(truth.size()) +
                        " true labels vs " + std::to_string(predicted.size()) +
                        " predictions");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i)
    if (truth[i] == predicted[i]) ++hits;
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

MetricReport evaluate_predictions(std::span<const int> truth,
                                  std::span<const int> predicted, int classes) {
  if (classes < 2) throw ArgumentError("metrics: need at least 2 classes");
  check_inputs(truth, predicted, classes);

  MetricReport rep;
  rep.confusion = Matrix::Zero(classes, classes);
  for (std::size_t i = 0; i < truth.size(); ++i)
    rep.confusion(truth[i], predicted[i]) += 1.0;

  rep.accuracy = rep.confusion.trace() / static_cast<double>(truth.size());
  rep.precision.resize(static_cast<std::size_t>(classes), 0.0);
  rep.recall.resize(static_cast<std::size_t>(classes), 0.0);
  rep.f1.resize(static_cast<std::size_t>(classes), 0.0);

  double f1_sum = 0.0;
  for (int c = 0; c < classes; ++c) {
    const double tp = rep.confusion(c, c);
    const double pred_c = rep.confusion.col(c).sum();
    const double true_c = rep.confusion.row(c).sum();
    if (pred_c == 0.0 && true_c == 0.0) rep.absent_classes.push_back(c);
    const double p = pred_c > 0.0 ? tp / pred_c : 0.0;
    const double r = true_c > 0.0 ? tp / true_c : 0.0;
    rep.precision[static_cast<std::size_t>(c)] = p;
    rep.recall[static_cast<std::size_t>(c)] = r;
    const double f = (p + r) > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
    rep.f1[static_cast<std::size_t>(c)] = f;
    f1_sum += f;
  }
  rep.macro_f1 = f1_sum / static_cast<double>(classes);
  return rep;
}

double macro_f1(std::span<const int> truth, std::span<const int> predicted,
                int classes) {
  return evaluate_predictions(truth, predicted, classes).macro_f1;
}

}  // namespace mvsl
