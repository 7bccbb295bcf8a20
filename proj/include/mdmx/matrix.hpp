#pragma once

// Row-major dense matrix of doubles, plus the handful of linear-algebra
// helpers the pipeline needs. All reductions go through the kernels layer.

#include <cassert>
#include <cmath>
#include <cstddef>
#include <vector>

#include "mdmx/kernels.hpp"

namespace mdmx {

struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double* row(std::size_t i) { return data.data() + i * cols; }
  const double* row(std::size_t i) const { return data.data() + i * cols; }

  double& at(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  void zero() { std::fill(data.begin(), data.end(), 0.0); }

  bool finite() const {
    for (double v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }

  bool operator==(const Matrix& o) const {
    return rows == o.rows && cols == o.cols && data == o.data;
  }
};

// C = A * B^T, A: m x k, B: n x k, C: m x n
inline void gemm_nt(const Matrix& a, const Matrix& b, Matrix& c) {
  assert(a.cols == b.cols);
  c.rows = a.rows;
  c.cols = b.rows;
  c.data.assign(a.rows * b.rows, 0.0);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < b.rows; ++j)
      c.at(i, j) = kernels::dot(a.row(i), b.row(j), a.cols);
}

// C = A * B, A: m x k, B: k x n, C: m x n
inline void gemm_nn(const Matrix& a, const Matrix& b, Matrix& c) {
  assert(a.cols == b.rows);
  c.rows = a.rows;
  c.cols = b.cols;
  c.data.assign(a.rows * b.cols, 0.0);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t k = 0; k < a.cols; ++k)
      kernels::axpy(a.at(i, k), b.row(k), c.row(i), b.cols);
}

// C += A^T * B, A: k x m, B: k x n, C: m x n (accumulating)
inline void gemm_tn_acc(const Matrix& a, const Matrix& b, Matrix& c) {
  assert(a.rows == b.rows);
  assert(c.rows == a.cols && c.cols == b.cols);
  for (std::size_t k = 0; k < a.rows; ++k)
    for (std::size_t i = 0; i < a.cols; ++i)
      kernels::axpy(a.at(k, i), b.row(k), c.row(i), b.cols);
}

}  // namespace mdmx
