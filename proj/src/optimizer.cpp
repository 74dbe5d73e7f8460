#include "protocore/optimizer.hpp"

#include <cmath>
#include <numbers>

#include "protocore/errors.hpp"

namespace protocore {

double scheduled_step_size(const OptimizerConfig& config, std::size_t k) {
  if (config.schedule == ScheduleKind::constant) return config.step_size;
  const double horizon = static_cast<double>(std::max<std::size_t>(config.horizon, 1));
  const double t = std::min(static_cast<double>(k), horizon) / horizon;
  return 0.5 * config.step_size * (1.0 + std::cos(std::numbers::pi * t));
}

Optimizer::Optimizer(OptimizerConfig config, std::vector<Tensor*> params)
    : config_(config), params_(std::move(params)) {
  if (!(config_.step_size > 0.0)) throw ValidationError("optimizer step_size must be positive");
  if (config_.weight_decay < 0.0) throw ValidationError("optimizer weight_decay must be non-negative");
  if (config_.kind == OptimizerKind::adam) {
    for (auto* p : params_) {
      m_.push_back(Tensor::zeros(p->shape));
      v_.push_back(Tensor::zeros(p->shape));
    }
  }
}

void Optimizer::zero_grad() {
  for (auto* p : params_) p->zero_grad();
}

bool Optimizer::step() {
  for (auto* p : params_) {
    for (double g : p->grad) {
      if (!std::isfinite(g)) return false;
    }
  }
  const double lr = scheduled_step_size(config_, step_);
  ++step_;
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(step_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& p = *params_[i];
    if (!p.has_grad()) continue;
    if (config_.weight_decay > 0.0) {
      for (auto& v : p.values) v -= lr * config_.weight_decay * v;
    }
    if (config_.kind == OptimizerKind::gradient_descent) {
      for (std::size_t j = 0; j < p.size(); ++j) p.values[j] -= lr * p.grad[j];
      continue;
    }
    auto& m = m_[i].values;
    auto& v = v_[i].values;
    for (std::size_t j = 0; j < p.size(); ++j) {
      const double g = p.grad[j];
      m[j] = config_.beta1 * m[j] + (1.0 - config_.beta1) * g;
      v[j] = config_.beta2 * v[j] + (1.0 - config_.beta2) * g * g;
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      p.values[j] -= lr * mhat / (std::sqrt(vhat) + config_.epsilon);
    }
  }
  return true;
}

}  // namespace protocore
