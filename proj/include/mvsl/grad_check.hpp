#pragma once

// Central finite-difference verification of tape gradients.

#include <functional>
#include <span>
#include <vector>

#include "mvsl/tape.hpp"

namespace mvsl {

// Rebuilds the scalar loss with each parameter entry nudged by +-step and
// compares the central difference against the gradient accumulated by one
// backward() sweep. Returns the maximum relative error
//     |analytic - numeric| / max(|analytic|, |numeric|, 1e-8)
// over every entry of every parameter. `step` must lie in [1e-6, 1e-4].
// Throws EvalError if any rebuilt loss is non-finite.
double grad_check(const std::function<Var(Tape&)>& loss_builder,
                  std::span<ParamNode* const> params, double step = 1e-5);

inline double grad_check(const std::function<Var(Tape&)>& loss_builder,
                         const std::vector<ParamNode*>& params, double step = 1e-5) {
  return grad_check(loss_builder, std::span<ParamNode* const>(params), step);
}

}  // namespace mvsl
