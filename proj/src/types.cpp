#include "protocore/types.hpp"

namespace protocore {

LossValue LossValue::zero(std::string name, std::string note) {
  LossValue out;
  out.terms.push_back({std::move(name), 1.0, 0.0});
  out.note = std::move(note);
  return out;
}

LossValue LossValue::from(Var v, std::string name) {
  LossValue out;
  out.value = v.item();
  out.terms.push_back({std::move(name), 1.0, out.value});
  out.var = v;
  out.has_var = true;
  return out;
}

double LossValue::term(std::string_view name) const {
  for (const auto& t : terms)
    if (t.name == name) return t.value;
  return 0.0;
}

}  // namespace protocore
