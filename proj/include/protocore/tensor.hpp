#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace protocore {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Dense row-major array of doubles with an optional gradient slot.
///
/// A scalar has an empty shape. The gradient buffer is empty until something
/// accumulates into it, after which it always matches `values` in length.
struct Tensor {
  Shape shape;
  std::vector<double> values;
  std::vector<double> grad;

  Tensor() = default;
  Tensor(Shape shape, std::vector<double> values);

  static Tensor zeros(Shape shape);
  static Tensor scalar(double v);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values);
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor row(std::vector<double> values);

  std::size_t size() const { return values.size(); }
  std::size_t rank() const { return shape.size(); }
  /// Rows of a rank-2 tensor (1 for scalars and rank-1 tensors).
  std::size_t rows() const;
  /// Columns of a rank-2 tensor (the length for rank-1, 1 for scalars).
  std::size_t cols() const;

  double& at(std::size_t r, std::size_t c) { return values[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return values[r * cols() + c]; }
  std::span<double> row_span(std::size_t r);
  std::span<const double> row_span(std::size_t r) const;

  bool has_grad() const { return !grad.empty(); }
  void zero_grad();
  /// Allocates a zero gradient if absent and returns it.
  std::span<double> ensure_grad();

  bool all_finite() const;
};

bool operator==(const Tensor& a, const Tensor& b);

}  // namespace protocore
