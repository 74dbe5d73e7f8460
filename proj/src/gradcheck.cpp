#include "protocore/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "protocore/errors.hpp"

namespace protocore {

namespace {

double evaluate(const LossBuilder& loss_fn, std::span<Tensor* const> params, bool with_backward) {
  Tape tape;
  std::vector<Var> leaves;
  leaves.reserve(params.size());
  for (auto* p : params) leaves.push_back(tape.leaf(*p));
  Var root = loss_fn(tape, leaves);
  const double value = root.item();
  if (!std::isfinite(value)) throw NumericalError("finite_diff_check: loss is not finite");
  if (with_backward) tape.backward(root);
  return value;
}

}  // namespace

double finite_diff_check(const LossBuilder& loss_fn, std::span<Tensor* const> params, double epsilon) {
  if (!(epsilon >= 1e-6 && epsilon <= 1e-3)) {
    throw ValidationError("finite_diff_check: epsilon must lie in [1e-6, 1e-3]");
  }
  std::vector<std::vector<double>> saved_grads;
  for (auto* p : params) {
    saved_grads.push_back(p->grad);
    p->grad.assign(p->size(), 0.0);
  }
  evaluate(loss_fn, params, true);
  std::vector<std::vector<double>> analytic;
  for (auto* p : params) analytic.push_back(p->grad);

  double worst = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& values = params[i]->values;
    for (std::size_t j = 0; j < values.size(); ++j) {
      const double original = values[j];
      values[j] = original + epsilon;
      const double up = evaluate(loss_fn, params, false);
      values[j] = original - epsilon;
      const double down = evaluate(loss_fn, params, false);
      values[j] = original;
      const double numeric = (up - down) / (2.0 * epsilon);
      const double a = analytic[i][j];
      worst = std::max(worst, std::abs(a - numeric) / std::max(1.0, std::abs(a)));
    }
  }
  for (std::size_t i = 0; i < params.size(); ++i) params[i]->grad = std::move(saved_grads[i]);
  return worst;
}

}  // namespace protocore
