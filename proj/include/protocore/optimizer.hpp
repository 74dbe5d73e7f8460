#pragma once

#include <cstddef>
#include <vector>

#include "protocore/tensor.hpp"

namespace protocore {

enum class OptimizerKind { gradient_descent, adam };
enum class ScheduleKind { constant, cosine };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::adam;
  double step_size = 0.01;
  ScheduleKind schedule = ScheduleKind::constant;
  /// Number of steps over which the cosine schedule anneals to zero.
  std::size_t horizon = 1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  /// Decoupled (AdamW-style) decay; applied as p <- p - lr * decay * p.
  double weight_decay = 0.0;
};

/// Step size of `config` at step k (k = 0 is the first step).
double scheduled_step_size(const OptimizerConfig& config, std::size_t k);

/// Updates a fixed list of tensors from their gradient slots.
///
/// Moment buffers are allocated per parameter with the parameter's shape.
/// A step whose gradients contain NaN or infinity leaves every parameter
/// and buffer untouched and returns false.
class Optimizer {
 public:
  Optimizer(OptimizerConfig config, std::vector<Tensor*> params);

  bool step();
  void zero_grad();

  std::size_t steps_taken() const { return step_; }
  double current_step_size() const { return scheduled_step_size(config_, step_); }
  const OptimizerConfig& config() const { return config_; }
  const std::vector<Tensor>& first_moments() const { return m_; }
  const std::vector<Tensor>& second_moments() const { return v_; }

 private:
  OptimizerConfig config_;
  std::vector<Tensor*> params_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  std::size_t step_ = 0;
};

}  // namespace protocore
