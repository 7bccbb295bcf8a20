#include "mdmx/contrastive.hpp"

#include <cmath>
#include <stdexcept>

namespace mdmx::contrastive {

Matrix pairwise_cosine(const Matrix& z) {
  for (std::size_t i = 0; i < z.rows; ++i) {
    const double n2 = kernels::dot(z.row(i), z.row(i), z.cols);
    if (std::abs(n2 - 1.0) > 1e-6)
      throw std::invalid_argument("pairwise_cosine: row " + std::to_string(i) +
                                  " is not unit-norm");
  }
  Matrix s;
  gemm_nt(z, z, s);
  return s;
}

NtxentResult ntxent_loss(const Matrix& z, double tau) {
  if (tau <= 0.0) throw std::invalid_argument("ntxent_loss: tau must be > 0");
  const std::size_t n = z.rows;  // 2M
  if (n < 2 || n % 2 != 0)
    throw std::invalid_argument("ntxent_loss: need an even number of rows >= 2");

  const Matrix s = pairwise_cosine(z);

  // A[i][k] = d loss / d s_{ik} treating s as an asymmetric matrix
  Matrix a(n, n);
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t pair = i ^ 1;
    double mx = -2.0;
    for (std::size_t k = 0; k < n; ++k)
      if (k != i && s.at(i, k) > mx) mx = s.at(i, k);
    double denom = 0.0;
    for (std::size_t k = 0; k < n; ++k)
      if (k != i) denom += std::exp((s.at(i, k) - mx) / tau);
    const double lse = mx / tau + std::log(denom);
    loss += lse - s.at(i, pair) / tau;
    for (std::size_t k = 0; k < n; ++k) {
      if (k == i) continue;
      const double p = std::exp((s.at(i, k) - mx) / tau) / denom;
      a.at(i, k) = (p - (k == pair ? 1.0 : 0.0)) / tau;
    }
  }
  const double inv = 1.0 / static_cast<double>(n);
  loss *= inv;

  // grad_z[r] = inv * sum_k (A[r][k] + A[k][r]) z[k]
  NtxentResult out;
  out.loss = loss;
  out.grad = Matrix(n, z.cols);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t k = 0; k < n; ++k) {
      const double c = (a.at(r, k) + a.at(k, r)) * inv;
      if (c != 0.0) kernels::axpy(c, z.row(k), out.grad.row(r), z.cols);
    }
  }
  return out;
}

}  // namespace mdmx::contrastive
