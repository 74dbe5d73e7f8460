#pragma once

// Define-by-run reverse-mode differentiation.
//
// A Tape records operations in execution order. Because every input is
// recorded before its consumer, reverse insertion order is a valid
// topological order and backward visits each node exactly once.

#include <cstddef>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "protocore/tensor.hpp"

namespace protocore {

class Tape;

enum class OpKind {
  constant,
  leaf,
  matmul,
  add,
  sub,
  mul,
  div,
  relu,
  exp,
  log,
  sum,
  mean,
  mse,
  softmax_cross_entropy,
  squared_euclidean,
  cosine_similarity,
  scale,
  add_scalar,
  row_sum,
  mean_rows,
  gather_rows,
  concat_rows,
  pick,
  custom,
};

std::string_view op_name(OpKind kind);

/// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape; }
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  /// Value of a single-element node.
  double item() const;
};

class Tape {
 public:
  /// Propagates the node's output gradient into its inputs' gradient buffers.
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  /// Binds a learnable tensor. backward() adds d(root)/d(param) into param.grad.
  Var leaf(Tensor& param);

  /// Appends an operation record. Used by the op library and by tests that
  /// need an operation with a hand-written backward.
  Var record(OpKind kind, std::vector<Var> inputs, Tensor value, BackwardFn backward);

  /// Reverse pass from a single-element root; accumulates into every bound leaf.
  void backward(Var root);

  std::size_t size() const { return nodes_.size(); }
  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  OpKind kind(std::size_t id) const { return nodes_[id].kind; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  const std::vector<std::size_t>& inputs(std::size_t id) const { return nodes_[id].inputs; }

  /// Gradient buffer of a node, zero-initialised on first access.
  std::span<double> grad(std::size_t id);
  std::span<const double> grad(std::size_t id) const { return nodes_[id].grad; }

 private:
  struct Node {
    OpKind kind = OpKind::constant;
    Tensor value;
    std::vector<double> grad;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    Tensor* leaf = nullptr;
    bool requires_grad = false;
  };

  std::vector<Node> nodes_;
};

// ---------------------------------------------------------------------------
// Operations. All of them validate shapes and throw ShapeError with the
// offending shapes in the message.

/// [n x k] * [k x m] -> [n x m]
Var matmul(Var a, Var b);
/// Elementwise a + b. `b` may also be a [m] or [1 x m] row broadcast over the rows of a.
Var add(Var a, Var b);
Var sub(Var a, Var b);
/// Elementwise product, same shapes.
Var mul(Var a, Var b);
/// Elementwise quotient, same shapes.
Var div(Var a, Var b);
Var relu(Var a);
Var exp(Var a);
/// Natural log. Non-positive inputs are rejected.
Var log(Var a);
Var sum(Var a);
Var mean(Var a);
/// mean((a - b)^2) over all elements, same shapes.
Var mse(Var a, Var b);
/// Mean over rows of -log softmax(logits)[label]. Classes with allowed[c] ==
/// false are treated as -inf logits. An empty mask allows every class.
Var softmax_cross_entropy(Var logits, std::span<const int> labels,
                          const std::vector<bool>& allowed = {});
/// Pairwise ||a_i - b_j||^2 for a [n x d], b [m x d] -> [n x m].
Var squared_euclidean(Var a, Var b);
/// Pairwise cosine similarity for a [n x d], b [m x d] -> [n x m]. Zero-norm rows are rejected.
Var cosine_similarity(Var a, Var b);
Var scale(Var a, double k);
Var add_scalar(Var a, double k);
Var neg(Var a);
/// [n x m] -> [n x 1]
Var row_sum(Var a);
/// [n x d] -> [1 x d] coordinate-wise mean of the rows.
Var mean_rows(Var a);
/// Selects rows by index (repeats allowed).
Var gather_rows(Var a, std::span<const std::size_t> rows);
/// Stacks [n_i x d] blocks vertically.
Var concat_rows(std::span<const Var> parts);
/// out[i] = a[i, cols[i]] -> [n x 1]
Var pick(Var a, std::span<const std::size_t> cols);

}  // namespace protocore
