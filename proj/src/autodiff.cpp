#include "protocore/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "protocore/errors.hpp"

namespace protocore {

namespace {

Tape& tape_of(Var a) {
  if (a.tape == nullptr) throw std::logic_error("operation on an unbound Var");
  return *a.tape;
}

Tape& tape_of(Var a, Var b) {
  if (a.tape != b.tape) throw std::logic_error("operands live on different tapes");
  return tape_of(a);
}

[[noreturn]] void shape_fail(std::string_view op, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + shape_string(a) + " and " +
                   shape_string(b));
}

void require_matrix(std::string_view op, const Tensor& t) {
  if (t.rank() != 2) {
    throw ShapeError(std::string(op) + ": expected a rank-2 tensor, got " + shape_string(t.shape));
  }
}

// Row broadcast: b is [m] or [1 x m] and a is [n x m].
bool is_row_broadcast(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2) return false;
  if (b.rank() == 1) return b.shape[0] == a.shape[1];
  return b.rank() == 2 && b.shape[0] == 1 && b.shape[1] == a.shape[1] && a.shape[0] != 1;
}

}  // namespace

std::string_view op_name(OpKind kind) {
  switch (kind) {
    case OpKind::constant: return "constant";
    case OpKind::leaf: return "leaf";
    case OpKind::matmul: return "matmul";
    case OpKind::add: return "add";
    case OpKind::sub: return "sub";
    case OpKind::mul: return "mul";
    case OpKind::div: return "div";
    case OpKind::relu: return "relu";
    case OpKind::exp: return "exp";
    case OpKind::log: return "log";
    case OpKind::sum: return "sum";
    case OpKind::mean: return "mean";
    case OpKind::mse: return "mse";
    case OpKind::softmax_cross_entropy: return "softmax_cross_entropy";
    case OpKind::squared_euclidean: return "squared_euclidean";
    case OpKind::cosine_similarity: return "cosine_similarity";
    case OpKind::scale: return "scale";
    case OpKind::add_scalar: return "add_scalar";
    case OpKind::row_sum: return "row_sum";
    case OpKind::mean_rows: return "mean_rows";
    case OpKind::gather_rows: return "gather_rows";
    case OpKind::concat_rows: return "concat_rows";
    case OpKind::pick: return "pick";
    case OpKind::custom: return "custom";
  }
  return "unknown";
}

const Tensor& Var::value() const { return tape_of(*this).value(id); }

double Var::item() const {
  const auto& v = value();
  if (v.size() != 1) throw ShapeError("item() on non-scalar " + shape_string(v.shape));
  return v.values[0];
}

// ---------------------------------------------------------------------------
// Tape

Var Tape::constant(Tensor value) {
  Node n;
  n.kind = OpKind::constant;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var{this, nodes_.size() - 1};
}

Var Tape::leaf(Tensor& param) {
  Node n;
  n.kind = OpKind::leaf;
  n.value = param;
  n.value.grad.clear();
  n.leaf = &param;
  n.requires_grad = true;
  nodes_.push_back(std::move(n));
  return Var{this, nodes_.size() - 1};
}

Var Tape::record(OpKind kind, std::vector<Var> inputs, Tensor value, BackwardFn backward) {
  Node n;
  n.kind = kind;
  n.value = std::move(value);
  n.inputs.reserve(inputs.size());
  for (const auto& in : inputs) {
    if (in.tape != this) throw std::logic_error("input recorded on another tape");
    n.inputs.push_back(in.id);
    n.requires_grad = n.requires_grad || nodes_[in.id].requires_grad;
  }
  if (n.requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var{this, nodes_.size() - 1};
}

std::span<double> Tape::grad(std::size_t id) {
  auto& node = nodes_[id];
  if (node.grad.size() != node.value.size()) node.grad.assign(node.value.size(), 0.0);
  return node.grad;
}

void Tape::backward(Var root) {
  if (root.tape != this) throw std::logic_error("backward root belongs to another tape");
  if (value(root.id).size() != 1) {
    throw ShapeError("backward requires a scalar root, got " + shape_string(value(root.id).shape));
  }
  for (auto& n : nodes_) n.grad.clear();
  grad(root.id)[0] = 1.0;
  for (std::size_t id = root.id + 1; id-- > 0;) {
    auto& node = nodes_[id];
    if (!node.requires_grad || node.grad.empty()) continue;
    if (node.leaf != nullptr) {
      auto dst = node.leaf->ensure_grad();
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += node.grad[i];
    } else if (node.backward) {
      node.backward(*this, id);
    }
  }
}

// ---------------------------------------------------------------------------
// Operations

Var matmul(Var a, Var b) {
  auto& tape = tape_of(a, b);
  const auto& A = a.value();
  const auto& B = b.value();
  if (A.rank() != 2 || B.rank() != 2 || A.shape[1] != B.shape[0]) shape_fail("matmul", A.shape, B.shape);
  const std::size_t n = A.shape[0], k = A.shape[1], m = B.shape[1];
  Tensor out = Tensor::zeros({n, m});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = A.values[i * k + p];
      const double* brow = &B.values[p * m];
      double* orow = &out.values[i * m];
      for (std::size_t j = 0; j < m; ++j) orow[j] += aip * brow[j];
    }
  }
  return tape.record(OpKind::matmul, {a, b}, std::move(out), [n, k, m](Tape& t, std::size_t self) {
    const auto ia = t.inputs(self)[0], ib = t.inputs(self)[1];
    const auto g = t.grad(self);
    const auto& A = t.value(ia).values;
    const auto& B = t.value(ib).values;
    if (t.requires_grad(ia)) {
      auto ga = t.grad(ia);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          double acc = 0.0;
          for (std::size_t j = 0; j < m; ++j) acc += g[i * m + j] * B[p * m + j];
          ga[i * k + p] += acc;
        }
    }
    if (t.requires_grad(ib)) {
      auto gb = t.grad(ib);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          const double aip = A[i * k + p];
          for (std::size_t j = 0; j < m; ++j) gb[p * m + j] += aip * g[i * m + j];
        }
    }
  });
}

namespace {

Var add_or_sub(Var a, Var b, double sign, OpKind kind) {
  auto& tape = tape_of(a, b);
  const auto& A = a.value();
  const auto& B = b.value();
  const bool broadcast = is_row_broadcast(A, B);
  if (!broadcast && A.shape != B.shape) shape_fail(op_name(kind), A.shape, B.shape);
  Tensor out = A;
  const std::size_t m = B.size();
  for (std::size_t i = 0; i < out.size(); ++i) out.values[i] += sign * B.values[broadcast ? i % m : i];
  return tape.record(kind, {a, b}, std::move(out), [sign, broadcast, m](Tape& t, std::size_t self) {
    const auto ia = t.inputs(self)[0], ib = t.inputs(self)[1];
    const auto g = t.grad(self);
    if (t.requires_grad(ia)) {
      auto ga = t.grad(ia);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (t.requires_grad(ib)) {
      auto gb = t.grad(ib);
      for (std::size_t i = 0; i < g.size(); ++i) gb[broadcast ? i % m : i] += sign * g[i];
    }
  });
}

template <typename Fwd, typename Bwd>
Var unary(Var a, OpKind kind, Fwd fwd, Bwd bwd) {
  auto& tape = tape_of(a);
  Tensor out = a.value();
  for (auto& v : out.values) v = fwd(v);
  return tape.record(kind, {a}, std::move(out), [bwd](Tape& t, std::size_t self) {
    const auto ia = t.inputs(self)[0];
    const auto g = t.grad(self);
    const auto& x = t.value(ia).values;
    const auto& y = t.value(self).values;
    auto ga = t.grad(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bwd(x[i], y[i]);
  });
}

}  // namespace

Var add(Var a, Var b) { return add_or_sub(a, b, 1.0, OpKind::add); }
Var sub(Var a, Var b) { return add_or_sub(a, b, -1.0, OpKind::sub); }

Var mul(Var a, Var b) {
  auto& tape = tape_of(a, b);
  const auto& A = a.value();
  const auto& B = b.value();
  if (A.shape != B.shape) shape_fail("mul", A.shape, B.shape);
  Tensor out = A;
  for (std::size_t i = 0; i < out.size(); ++i) out.values[i] *= B.values[i];
  return tape.record(OpKind::mul, {a, b}, std::move(out), [](Tape& t, std::size_t self) {
    const auto ia = t.inputs(self)[0], ib = t.inputs(self)[1];
    const auto g = t.grad(self);
    const auto& A = t.value(ia).values;
    const auto& B = t.value(ib).values;
    if (t.requires_grad(ia)) {
      auto ga = t.grad(ia);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * B[i];
    }
    if (t.requires_grad(ib)) {
      auto gb = t.grad(ib);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * A[i];
    }
  });
}

Var div(Var a, Var b) {
  auto& tape = tape_of(a, b);
  const auto& A = a.value();
  const auto& B = b.value();
  if (A.shape != B.shape) shape_fail("div", A.shape, B.shape);
  Tensor out = A;
  for (std::size_t i = 0; i < out.size(); ++i) out.values[i] /= B.values[i];
  return tape.record(OpKind::div, {a, b}, std::move(out), [](Tape& t, std::size_t self) {
    const auto ia = t.inputs(self)[0], ib = t.inputs(self)[1];
    const auto g = t.grad(self);
    const auto& B = t.value(ib).values;
    const auto& Y = t.value(self).values;
    if (t.requires_grad(ia)) {
      auto ga = t.grad(ia);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / B[i];
    }
    if (t.requires_grad(ib)) {
      auto gb = t.grad(ib);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i] * Y[i] / B[i];
    }
  });
}

Var relu(Var a) {
  return unary(
      a, OpKind::relu, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var exp(Var a) {
  return unary(
      a, OpKind::exp, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var log(Var a) {
  for (double v : a.value().values) {
    if (!(v > 0.0)) throw NumericalError("log of non-positive value " + std::to_string(v));
  }
  return unary(
      a, OpKind::log, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var scale(Var a, double k) {
  return unary(
      a, OpKind::scale, [k](double x) { return k * x; }, [k](double, double) { return k; });
}

Var add_scalar(Var a, double k) {
  return unary(
      a, OpKind::add_scalar, [k](double x) { return x + k; }, [](double, double) { return 1.0; });
}

Var neg(Var a) { return scale(a, -1.0); }

namespace {

Var reduce_all(Var a, OpKind kind, double factor) {
  auto& tape = tape_of(a);
  double acc = 0.0;
  for (double v : a.value().values) acc += v;
  return tape.record(kind, {a}, Tensor::scalar(acc * factor), [factor](Tape& t, std::size_t self) {
    const auto ia = t.inputs(self)[0];
    const double g = t.grad(self)[0] * factor;
    for (auto& v : t.grad(ia)) v += g;
  });
}

}  // namespace

Var sum(Var a) { return reduce_all(a, OpKind::sum, 1.0); }
Var mean(Var a) { return reduce_all(a, OpKind::mean, 1.0 / static_cast<double>(a.value().size())); }

Var mse(Var a, Var b) {
  auto& tape = tape_of(a, b);
  const auto& A = a.value();
  const auto& B = b.value();
  if (A.shape != B.shape) shape_fail("mse", A.shape, B.shape);
  const double inv_n = 1.0 / static_cast<double>(A.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < A.size(); ++i) {
    const double d = A.values[i] - B.values[i];
    acc += d * d;
  }
  return tape.record(OpKind::mse, {a, b}, Tensor::scalar(acc * inv_n), [inv_n](Tape& t, std::size_t self) {
    const auto ia = t.inputs(self)[0], ib = t.inputs(self)[1];
    const double g = t.grad(self)[0];
    const auto& A = t.value(ia).values;
    const auto& B = t.value(ib).values;
    if (t.requires_grad(ia)) {
      auto ga = t.grad(ia);
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += 2.0 * inv_n * g * (A[i] - B[i]);
    }
    if (t.requires_grad(ib)) {
      auto gb = t.grad(ib);
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] -= 2.0 * inv_n * g * (A[i] - B[i]);
    }
  });
}

Var softmax_cross_entropy(Var logits, std::span<const int> labels, const std::vector<bool>& allowed) {
  auto& tape = tape_of(logits);
  const auto& L = logits.value();
  require_matrix("softmax_cross_entropy", L);
  const std::size_t n = L.shape[0], c = L.shape[1];
  if (labels.size() != n) {
    throw ShapeError("softmax_cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                     shape_string(L.shape) + " logits");
  }
  if (!allowed.empty() && allowed.size() != c) {
    throw ShapeError("softmax_cross_entropy: mask of length " + std::to_string(allowed.size()) +
                     " for " + std::to_string(c) + " classes");
  }
  auto is_allowed = [&](std::size_t j) { return allowed.empty() || allowed[j]; };
  std::vector<double> probs(n * c, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const int y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= c || !is_allowed(static_cast<std::size_t>(y))) {
      throw ValidationError("softmax_cross_entropy: label " + std::to_string(y) +
                            " is outside the allowed classes");
    }
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < c; ++j)
      if (is_allowed(j)) mx = std::max(mx, L.values[i * c + j]);
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j)
      if (is_allowed(j)) z += std::exp(L.values[i * c + j] - mx);
    for (std::size_t j = 0; j < c; ++j)
      if (is_allowed(j)) probs[i * c + j] = std::exp(L.values[i * c + j] - mx) / z;
    total += -(L.values[i * c + static_cast<std::size_t>(y)] - mx - std::log(z));
  }
  std::vector<int> ys(labels.begin(), labels.end());
  return tape.record(OpKind::softmax_cross_entropy, {logits}, Tensor::scalar(total / static_cast<double>(n)),
                     [probs = std::move(probs), ys = std::move(ys), n, c](Tape& t, std::size_t self) {
                       const auto ia = t.inputs(self)[0];
                       const double g = t.grad(self)[0] / static_cast<double>(n);
                       auto ga = t.grad(ia);
                       for (std::size_t i = 0; i < n; ++i) {
                         for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += g * probs[i * c + j];
                         ga[i * c + static_cast<std::size_t>(ys[i])] -= g;
                       }
                     });
}

Var squared_euclidean(Var a, Var b) {
  auto& tape = tape_of(a, b);
  const auto& A = a.value();
  const auto& B = b.value();
  if (A.rank() != 2 || B.rank() != 2 || A.shape[1] != B.shape[1]) shape_fail("squared_euclidean", A.shape, B.shape);
  const std::size_t n = A.shape[0], m = B.shape[0], d = A.shape[1];
  Tensor out = Tensor::zeros({n, m});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < d; ++k) {
        const double diff = A.values[i * d + k] - B.values[j * d + k];
        acc += diff * diff;
      }
      out.values[i * m + j] = acc;
    }
  return tape.record(OpKind::squared_euclidean, {a, b}, std::move(out), [n, m, d](Tape& t, std::size_t self) {
    const auto ia = t.inputs(self)[0], ib = t.inputs(self)[1];
    const auto g = t.grad(self);
    const auto& A = t.value(ia).values;
    const auto& B = t.value(ib).values;
    const bool need_a = t.requires_grad(ia), need_b = t.requires_grad(ib);
    std::span<double> ga, gb;
    if (need_a) ga = t.grad(ia);
    if (need_b) gb = t.grad(ib);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j) {
        const double gij = 2.0 * g[i * m + j];
        if (gij == 0.0) continue;
        for (std::size_t k = 0; k < d; ++k) {
          const double diff = A[i * d + k] - B[j * d + k];
          if (need_a) ga[i * d + k] += gij * diff;
          if (need_b) gb[j * d + k] -= gij * diff;
        }
      }
  });
}

Var cosine_similarity(Var a, Var b) {
  auto& tape = tape_of(a, b);
  const auto& A = a.value();
  const auto& B = b.value();
  if (A.rank() != 2 || B.rank() != 2 || A.shape[1] != B.shape[1]) shape_fail("cosine_similarity", A.shape, B.shape);
  const std::size_t n = A.shape[0], m = B.shape[0], d = A.shape[1];
  auto norms = [d](const Tensor& X) {
    std::vector<double> out(X.rows());
    for (std::size_t i = 0; i < out.size(); ++i) {
      double acc = 0.0;
      for (std::size_t k = 0; k < d; ++k) acc += X.values[i * d + k] * X.values[i * d + k];
      out[i] = std::sqrt(acc);
      if (!(out[i] > 0.0)) throw NumericalError("cosine_similarity: zero-norm vector at row " + std::to_string(i));
    }
    return out;
  };
  auto na = norms(A);
  auto nb = norms(B);
  Tensor out = Tensor::zeros({n, m});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      double dot = 0.0;
      for (std::size_t k = 0; k < d; ++k) dot += A.values[i * d + k] * B.values[j * d + k];
      out.values[i * m + j] = dot / (na[i] * nb[j]);
    }
  return tape.record(OpKind::cosine_similarity, {a, b}, std::move(out),
                     [n, m, d, na = std::move(na), nb = std::move(nb)](Tape& t, std::size_t self) {
                       const auto ia = t.inputs(self)[0], ib = t.inputs(self)[1];
                       const auto g = t.grad(self);
                       const auto& A = t.value(ia).values;
                       const auto& B = t.value(ib).values;
                       const auto& S = t.value(self).values;
                       const bool need_a = t.requires_grad(ia), need_b = t.requires_grad(ib);
                       std::span<double> ga, gb;
                       if (need_a) ga = t.grad(ia);
                       if (need_b) gb = t.grad(ib);
                       for (std::size_t i = 0; i < n; ++i)
                         for (std::size_t j = 0; j < m; ++j) {
                           const double gij = g[i * m + j];
                           if (gij == 0.0) continue;
                           const double s = S[i * m + j];
                           const double inv = 1.0 / (na[i] * nb[j]);
                           for (std::size_t k = 0; k < d; ++k) {
                             const double ak = A[i * d + k], bk = B[j * d + k];
                             if (need_a) ga[i * d + k] += gij * (bk * inv - s * ak / (na[i] * na[i]));
                             if (need_b) gb[j * d + k] += gij * (ak * inv - s * bk / (nb[j] * nb[j]));
                           }
                         }
                     });
}

Var row_sum(Var a) {
  auto& tape = tape_of(a);
  const auto& A = a.value();
  require_matrix("row_sum", A);
  const std::size_t n = A.shape[0], m = A.shape[1];
  Tensor out = Tensor::zeros({n, 1});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) out.values[i] += A.values[i * m + j];
  return tape.record(OpKind::row_sum, {a}, std::move(out), [n, m](Tape& t, std::size_t self) {
    const auto ia = t.inputs(self)[0];
    const auto g = t.grad(self);
    auto ga = t.grad(ia);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j) ga[i * m + j] += g[i];
  });
}

Var mean_rows(Var a) {
  auto& tape = tape_of(a);
  const auto& A = a.value();
  require_matrix("mean_rows", A);
  const std::size_t n = A.shape[0], d = A.shape[1];
  Tensor out = Tensor::zeros({1, d});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < d; ++k) out.values[k] += A.values[i * d + k];
  for (auto& v : out.values) v /= static_cast<double>(n);
  return tape.record(OpKind::mean_rows, {a}, std::move(out), [n, d](Tape& t, std::size_t self) {
    const auto ia = t.inputs(self)[0];
    const auto g = t.grad(self);
    auto ga = t.grad(ia);
    const double inv = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < d; ++k) ga[i * d + k] += g[k] * inv;
  });
}

Var gather_rows(Var a, std::span<const std::size_t> rows) {
  auto& tape = tape_of(a);
  const auto& A = a.value();
  require_matrix("gather_rows", A);
  if (rows.empty()) throw ShapeError("gather_rows: empty index list");
  const std::size_t n = A.shape[0], d = A.shape[1];
  Tensor out = Tensor::zeros({rows.size(), d});
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= n) throw ShapeError("gather_rows: row " + std::to_string(rows[r]) + " out of " + shape_string(A.shape));
    std::copy_n(&A.values[rows[r] * d], d, &out.values[r * d]);
  }
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  return tape.record(OpKind::gather_rows, {a}, std::move(out), [idx = std::move(idx), d](Tape& t, std::size_t self) {
    const auto ia = t.inputs(self)[0];
    const auto g = t.grad(self);
    auto ga = t.grad(ia);
    for (std::size_t r = 0; r < idx.size(); ++r)
      for (std::size_t k = 0; k < d; ++k) ga[idx[r] * d + k] += g[r * d + k];
  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  auto& tape = tape_of(parts.front());
  const std::size_t d = parts.front().value().cols();
  std::size_t total = 0;
  std::vector<double> values;
  std::vector<std::size_t> offsets;
  for (const auto& p : parts) {
    const auto& P = p.value();
    require_matrix("concat_rows", P);
    if (P.shape[1] != d) shape_fail("concat_rows", parts.front().shape(), P.shape);
    if (p.tape != &tape) throw std::logic_error("concat_rows: inputs on different tapes");
    offsets.push_back(values.size());
    values.insert(values.end(), P.values.begin(), P.values.end());
    total += P.shape[0];
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return tape.record(OpKind::concat_rows, std::move(inputs), Tensor::matrix(total, d, std::move(values)),
                     [offsets = std::move(offsets)](Tape& t, std::size_t self) {
                       const auto g = t.grad(self);
                       const auto& ins = t.inputs(self);
                       for (std::size_t p = 0; p < ins.size(); ++p) {
                         if (!t.requires_grad(ins[p])) continue;
                         auto gp = t.grad(ins[p]);
                         for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += g[offsets[p] + i];
                       }
                     });
}

Var pick(Var a, std::span<const std::size_t> cols) {
  auto& tape = tape_of(a);
  const auto& A = a.value();
  require_matrix("pick", A);
  const std::size_t n = A.shape[0], m = A.shape[1];
  if (cols.size() != n) throw ShapeError("pick: " + std::to_string(cols.size()) + " indices for " + shape_string(A.shape));
  Tensor out = Tensor::zeros({n, 1});
  for (std::size_t i = 0; i < n; ++i) {
    if (cols[i] >= m) throw ShapeError("pick: column " + std::to_string(cols[i]) + " out of " + shape_string(A.shape));
    out.values[i] = A.values[i * m + cols[i]];
  }
  std::vector<std::size_t> idx(cols.begin(), cols.end());
  return tape.record(OpKind::pick, {a}, std::move(out), [idx = std::move(idx), m](Tape& t, std::size_t self) {
    const auto ia = t.inputs(self)[0];
    const auto g = t.grad(self);
    auto ga = t.grad(ia);
    for (std::size_t i = 0; i < idx.size(); ++i) ga[i * m + idx[i]] += g[i];
  });
}

}  // namespace protocore
