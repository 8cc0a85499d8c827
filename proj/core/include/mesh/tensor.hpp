#pragma once

#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "mesh/common.hpp"

namespace mesh {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

// Dense row-major array. Value type; copies are deep.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, Real fill = Real{0});
  Tensor(Shape shape, std::vector<Real> values);

  static Tensor scalar(Real v) { return Tensor({1}, {v}); }
  static Tensor matrix(std::size_t rows, std::size_t cols, std::initializer_list<Real> values);

  [[nodiscard]] const Shape& shape() const { return shape_; }
  [[nodiscard]] std::size_t rank() const { return shape_.size(); }
  [[nodiscard]] std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  [[nodiscard]] std::size_t size() const { return values_.size(); }
  [[nodiscard]] bool empty() const { return values_.empty(); }

  // 2-D view helpers: rows = leading dimension, cols = product of the rest.
  [[nodiscard]] std::size_t rows() const { return shape_.empty() ? 0 : shape_[0]; }
  [[nodiscard]] std::size_t cols() const { return rows() == 0 ? 0 : size() / rows(); }

  [[nodiscard]] std::span<Real> values() { return values_; }
  [[nodiscard]] std::span<const Real> values() const { return values_; }
  [[nodiscard]] Real* data() { return values_.data(); }
  [[nodiscard]] const Real* data() const { return values_.data(); }

  Real& operator[](std::size_t i) { return values_[i]; }
  Real operator[](std::size_t i) const { return values_[i]; }
  Real& at(std::size_t r, std::size_t c) { return values_[r * cols() + c]; }
  [[nodiscard]] Real at(std::size_t r, std::size_t c) const { return values_[r * cols() + c]; }

  [[nodiscard]] std::span<Real> row(std::size_t r) { return {values_.data() + r * cols(), cols()}; }
  [[nodiscard]] std::span<const Real> row(std::size_t r) const {
    return {values_.data() + r * cols(), cols()};
  }

  [[nodiscard]] Real item() const;
  void fill(Real v);
  void reshape(Shape shape);
  [[nodiscard]] bool all_finite() const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<Real> values_;
};

// Dense kernels shared by the ops and by non-differentiable inference code.
// C (m x n) = op(A) * op(B), accumulating into C when `accumulate` is set.
void gemm(bool transpose_a, bool transpose_b, std::size_t m, std::size_t n, std::size_t k,
          const Real* a, const Real* b, Real* c, bool accumulate);

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor matmul_transposed(const Tensor& a, const Tensor& b);  // a * b^T

}  // namespace mesh
