#include "mvsl/grad_check.hpp"

#include <algorithm>
#include <cmath>

namespace mvsl {

namespace {

double rebuild_loss(const std::function<Var(Tape&)>& loss_builder) {
  Tape t;
  Var loss = loss_builder(t);
  const Matrix& v = loss.value();
  if (v.rows() != 1 || v.cols() != 1) {
    throw ShapeError("grad_check: loss builder must return a 1x1 node, got " +
                     shape_str(v));
  }
  const double f = v(0, 0);
  if (!std::isfinite(f)) {
    throw EvalError("grad_check: loss is not finite");
  }
  return f;
}

}  // namespace

double grad_check(const std::function<Var(Tape&)>& loss_builder,
                  std::span<ParamNode* const> params, double step) {
  if (!(step >= 1e-6 && step <= 1e-4)) {
    throw ArgumentError("grad_check: step must lie in [1e-6, 1e-4]");
  }

  for (ParamNode* p : params) {
    p->zero_grad();
  }
  {
    Tape t;
    Var loss = loss_builder(t);
    const Matrix& v = loss.value();
    if (v.rows() != 1 || v.cols() != 1) {
      throw ShapeError("grad_check: loss builder must return a 1x1 node, got " +
                       shape_str(v));
    }
    if (!std::isfinite(v(0, 0))) {
      throw EvalError("grad_check: loss is not finite");
    }
    t.backward(loss);
  }

  std::vector<Matrix> analytic;
  analytic.reserve(params.size());
  for (ParamNode* p : params) {
    analytic.push_back(p->gradient);
  }

  double worst = 0.0;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Matrix& v = params[pi]->value;
    for (Index i = 0; i < v.rows(); ++i) {
      for (Index j = 0; j < v.cols(); ++j) {
        const double orig = v(i, j);
        v(i, j) = orig + step;
        const double f_plus = rebuild_loss(loss_builder);
        v(i, j) = orig - step;
        const double f_minus = rebuild_loss(loss_builder);
        v(i, j) = orig;

        const double numeric = (f_plus - f_minus) / (2.0 * step);
        const double a = analytic[pi](i, j);
        const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
        worst = std::max(worst, std::abs(a - numeric) / denom);
      }
    }
  }
  return worst;
}

}  // namespace mvsl
