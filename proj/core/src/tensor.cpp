#include "mesh/tensor.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

namespace mesh {

namespace {

using RowMatrix = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMatrix>;
using MutMap = Eigen::Map<RowMatrix>;

}  // namespace

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) out << (i ? "x" : "") << shape[i];
  out << ']';
  return out.str();
}

Tensor::Tensor(Shape shape, Real fill) : shape_(std::move(shape)), values_(shape_size(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<Real> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  require(values_.size() == shape_size(shape_),
          "tensor: " + std::to_string(values_.size()) + " values for shape " + shape_string(shape_));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::initializer_list<Real> values) {
  return Tensor({rows, cols}, std::vector<Real>(values));
}

Real Tensor::item() const {
  require(values_.size() == 1, "tensor: item() on shape " + shape_string(shape_));
  return values_[0];
}

void Tensor::fill(Real v) { std::fill(values_.begin(), values_.end(), v); }

void Tensor::reshape(Shape shape) {
  require(shape_size(shape) == values_.size(),
          "tensor: cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
  shape_ = std::move(shape);
}

bool Tensor::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](Real v) { return std::isfinite(v); });
}

void gemm(bool transpose_a, bool transpose_b, std::size_t m, std::size_t n, std::size_t k,
          const Real* a, const Real* b, Real* c, bool accumulate) {
  const auto M = static_cast<Eigen::Index>(m);
  const auto N = static_cast<Eigen::Index>(n);
  const auto K = static_cast<Eigen::Index>(k);
  MutMap out(c, M, N);
  if (m == 0 || n == 0) return;
  if (k == 0) {
    if (!accumulate) out.setZero();
    return;
  }
  auto run = [&](const auto& lhs, const auto& rhs) {
    if (accumulate) {
      out.noalias() += lhs * rhs;
    } else {
      out.noalias() = lhs * rhs;
    }
  };
  if (!transpose_a && !transpose_b) {
    run(ConstMap(a, M, K), ConstMap(b, K, N));
  } else if (!transpose_a && transpose_b) {
    run(ConstMap(a, M, K), ConstMap(b, N, K).transpose());
  } else if (transpose_a && !transpose_b) {
    run(ConstMap(a, K, M).transpose(), ConstMap(b, K, N));
  } else {
    run(ConstMap(a, K, M).transpose(), ConstMap(b, N, K).transpose());
  }
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require(a.rank() == 2 && b.rank() == 2 && a.dim(1) == b.dim(0),
          "matmul: shapes " + shape_string(a.shape()) + " and " + shape_string(b.shape()));
  Tensor out({a.dim(0), b.dim(1)});
  gemm(false, false, a.dim(0), b.dim(1), a.dim(1), a.data(), b.data(), out.data(), false);
  return out;
}

Tensor matmul_transposed(const Tensor& a, const Tensor& b) {
  require(a.rank() == 2 && b.rank() == 2 && a.dim(1) == b.dim(1),
          "matmul_transposed: shapes " + shape_string(a.shape()) + " and " + shape_string(b.shape()));
  Tensor out({a.dim(0), b.dim(0)});
  gemm(false, true, a.dim(0), b.dim(0), a.dim(1), a.data(), b.data(), out.data(), false);
  return out;
}

}  // namespace mesh
