#pragma once

// MixEMatch: sharpened pseudo-labels from weak views, label refinement with
// the clean probability w, and Beta mixup with lambda' = max(lambda,
// 1-lambda) applied to strong-view inputs and embeddings alike.
//
// Pool convention: strong views are flattened into "pool items", labeled
// samples first, two consecutive items per sample (strong view a then b).

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "mdmx/matrix.hpp"
#include "mdmx/rng.hpp"

namespace mdmx::mixematch {

struct MixParams {
  double T = 0.5;    // sharpening temperature
  double alpha = 4;  // Beta concentration

  void validate() const {
    if (!(T > 0.0)) throw std::invalid_argument("MixParams: T must be > 0");
    if (!(alpha > 0.0)) throw std::invalid_argument("MixParams: alpha must be > 0");
  }
};

// q_c = p_c^{1/T} / sum_j p_j^{1/T}
std::vector<double> sharpen(const std::vector<double>& p, double temperature);

// lambda' = max(lambda, 1 - lambda), lambda ~ Beta(alpha, alpha)
double sample_lambda(double alpha, Rng& rng);

// a' = l a1 + (1-l) a2 elementwise (used for inputs, embeddings and targets)
std::vector<double> mix(const std::vector<double>& a1, const std::vector<double>& a2,
                        double lambda_prime);

// q = sharpen( (softmax(w1) + softmax(w2)) / 2, T ) rows; weak logits in.
Matrix guess_labels(const Matrix& weak1_logits, const Matrix& weak2_logits,
                    double temperature);

// target = w * onehot(y) + (1-w) * mean weak prediction
std::vector<double> refine_label(int y, int n_classes, double w,
                                 const std::vector<double>& weak_pred_mean);

struct MixPlan {
  std::vector<double> lambda;        // per pool item
  std::vector<std::size_t> partner;  // shuffled-pool partner index
  std::size_t labeled_items = 0;     // first labeled_items pool rows are X
};

// One lambda' per item and a shuffled partner permutation over the combined
// labeled+unlabeled pool. Empty unlabeled pool degenerates to X-vs-X mixing.
MixPlan draw_plan(std::size_t labeled_items, std::size_t unlabeled_items,
                  double alpha, Rng& rng);

struct MixedBatch {
  Matrix x;        // mixed inputs, pool order
  Matrix h;        // mixed embeddings
  Matrix targets;  // mixed soft targets
  MixPlan plan;
};

// rows_out[a] = lambda[a] * rows[a] + (1-lambda[a]) * rows[partner[a]]
Matrix apply_mix(const Matrix& rows, const MixPlan& plan);

// Full Eq.-style call: pool = [X_strong; U_strong] with matching embeddings
// and targets; returns mixed inputs/embeddings/targets plus the plan used.
MixedBatch mixematch(const Matrix& x_strong, const Matrix& u_strong,
                     const Matrix& h_x, const Matrix& h_u,
                     const Matrix& targets_x, const Matrix& targets_u,
                     const MixParams& params, Rng& rng);

}  // namespace mdmx::mixematch
