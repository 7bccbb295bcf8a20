#pragma once

// NT-Xent contrastive objective over 2M unit-norm projections, rows ordered
// [view-a of sample 1, view-b of sample 1, view-a of sample 2, ...], so the
// positive pair of row i is row i^1. Loss is averaged over the 2M rows.

#include "mdmx/matrix.hpp"

namespace mdmx::contrastive {

struct NtxentResult {
  double loss = 0.0;
  Matrix grad;  // d loss / d Z, same shape as Z
};

// S = Z Z^T; rows must be unit-norm within 1e-6.
Matrix pairwise_cosine(const Matrix& z);

// loss = (1/2M) sum_i -log( exp(s_{i,pair}/tau) / sum_{k != i} exp(s_{ik}/tau) )
// Log-sum-exp with max subtraction; grad is w.r.t. the rows of z.
NtxentResult ntxent_loss(const Matrix& z, double tau);

}  // namespace mdmx::contrastive
