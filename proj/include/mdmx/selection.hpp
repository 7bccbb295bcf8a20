#pragma once

// Sample selection: KNN average-distance OOD scores in embedding space and
// an EM-fitted two-component 1-D GMM over per-sample supervised losses that
// yields the clean/noisy split.

#include <cstdint>
#include <vector>

#include "mdmx/matrix.hpp"
#include "mdmx/nn.hpp"

namespace mdmx::selection {

// score_i = mean Euclidean distance to the k nearest other rows; ties broken
// by smaller index. Requires 1 <= k <= N-1.
std::vector<double> knn_ood_scores(const Matrix& h, std::size_t k);

// Marks the ceil(f * N) highest-scoring rows; ties by smaller index first.
std::vector<bool> ood_mask(const std::vector<double>& scores, double fraction);

// Plain cross-entropy of the model prediction on un-augmented inputs.
std::vector<double> per_sample_losses(const nn::Model& model, const Matrix& x,
                                      const std::vector<int>& labels);

struct GmmFit {
  // component 0 is the lower-mean "clean" component; reported in the
  // original loss units
  double mean[2] = {0.0, 0.0};
  double var[2] = {1.0, 1.0};
  double weight[2] = {0.5, 0.5};
  int iterations = 0;
  double log_likelihood = 0.0;
  bool degenerate = false;
  // min-max normalization applied before EM; posteriors reuse it
  double loss_min = 0.0;
  double loss_max = 1.0;
  std::vector<double> ll_trace;
};

// EM on min-max normalized losses. Init: means at the 10th/90th percentiles,
// equal weights, variances = sample variance. Variance floor 1e-6. A spread
// below 1e-12 sets the degenerate flag.
GmmFit fit_gmm_1d(const std::vector<double>& losses, int max_iters = 200,
                  double tol = 1e-6);

// Posterior of the lower-mean component; 1.0 on a degenerate fit.
double clean_posterior(const GmmFit& fit, double loss);

struct SplitResult {
  std::vector<double> clean_probs;       // aligned with `active`
  std::vector<std::size_t> clean_idx;    // X
  std::vector<std::size_t> noisy_idx;    // U
  double threshold = 0.3;
};

// X = {i in active : w_i >= tau2}, boundary inclusive.
SplitResult split_clean_noisy(const std::vector<double>& w, double tau2,
                              const std::vector<std::size_t>& active);

}  // namespace mdmx::selection
