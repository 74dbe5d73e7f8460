#pragma once

#include <functional>
#include <span>

#include "protocore/autodiff.hpp"

namespace protocore {

/// Builds a scalar loss on `tape` from leaves bound to the checked parameters,
/// in the same order as they were passed to finite_diff_check.
using LossBuilder = std::function<Var(Tape& tape, std::span<const Var> leaves)>;

/// Compares reverse-mode gradients against central differences.
///
/// Returns max over all coordinates of |analytic - numeric| / max(1, |analytic|).
/// Parameter values and gradient slots are restored before returning.
/// Throws ValidationError for epsilon outside [1e-6, 1e-3] and NumericalError
/// if any evaluated loss is non-finite.
double finite_diff_check(const LossBuilder& loss_fn, std::span<Tensor* const> params, double epsilon = 1e-6);

}  // namespace protocore
