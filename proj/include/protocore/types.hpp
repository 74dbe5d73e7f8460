#pragma once

#include <string>
#include <vector>

#include "protocore/autodiff.hpp"

namespace protocore {

enum class PrototypeSource { real_current, synthetic_memory, blended, anchor };

struct Prototype {
  int class_id = 0;
  std::vector<double> vector;
  PrototypeSource source = PrototypeSource::real_current;
};

/// A learnable latent and its decoded input. `s` always equals decode(z).
struct SyntheticExemplar {
  int class_id = 0;
  std::vector<double> z;
  std::vector<double> s;
  int origin_task = 0;

  bool operator==(const SyntheticExemplar&) const = default;
};

struct LossTerm {
  std::string name;
  double weight = 1.0;
  double value = 0.0;
};

/// A scalar loss with its named components. `value` equals
/// sum(weight * term.value) over `terms`. `var` is the differentiable node
/// when the loss was built on a tape and has at least one contributing term.
struct LossValue {
  double value = 0.0;
  std::vector<LossTerm> terms;
  Var var;
  bool has_var = false;
  /// Free-form note, e.g. why a loss contributed nothing.
  std::string note;

  static LossValue zero(std::string name, std::string note = {});
  static LossValue from(Var v, std::string name);
  double term(std::string_view name) const;
};

}  // namespace protocore
