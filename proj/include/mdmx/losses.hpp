#pragma once

// Loss components of the semi-supervised objective: symmetric cross-entropy
// on the labeled mixes, mean-squared probability error on the unlabeled
// mixes, NT-Xent on strong-view projections, combined as
// L = L_sup + lambda_u(epoch) * L_unsup + lambda_c * L_self.

#include <vector>

#include "mdmx/matrix.hpp"
#include "mdmx/mixematch.hpp"
#include "mdmx/nn.hpp"

namespace mdmx::losses {

struct LossWeights {
  double lambda_u = 25.0;
  double lambda_c = 0.025;
  double ramp_epochs = 16.0;  // linear ramp of lambda_u
  double sce_alpha = 0.1;
  double sce_beta = 1.0;
  double log_clip = -4.0;  // A in logclip(0) = A
};

inline double lambda_u_at(const LossWeights& w, double epoch) {
  if (w.ramp_epochs <= 0.0) return w.lambda_u;
  return w.lambda_u * std::min(1.0, epoch / w.ramp_epochs);
}

void softmax_row(const double* logits, std::size_t c, double* out);

// SCE = alpha * CE(target, p) + beta * RCE(target, p),
// RCE = -sum_c p_c * max(log target_c, A). grad_logits may be null.
double sce_loss_row(const double* logits, const double* target, std::size_t c,
                    const LossWeights& w, double* grad_logits);

// (1/C) || softmax(logits) - target ||^2
double mse_prob_loss_row(const double* logits, const double* target, std::size_t c,
                         double* grad_logits);

// Plain CE against a soft target (baseline / warmup when sce_beta = 0).
double ce_loss_row(const double* logits, const double* target, std::size_t c,
                   double* grad_logits);

struct SemiBatch {
  Matrix pool_inputs;    // strong views, pool order (labeled items first,
                         // interleaved view pairs per sample)
  Matrix mixed_inputs;   // apply_mix(pool_inputs, plan)
  Matrix mixed_targets;  // apply_mix(pool targets, plan)
  mixematch::MixPlan plan;
  double ntxent_tau = 0.5;
};

struct SemiLossResult {
  double total = 0.0;
  double l_sup = 0.0;
  double l_unsup = 0.0;
  double l_self = 0.0;
};

// Forward (and optionally backward into model grads) of the composite loss.
// Input- and embedding-space terms share the mixed targets; the embedding
// mix is recomputed from the current encoder so gradients flow through both
// mixing operands.
SemiLossResult semi_loss(nn::Model& model, const SemiBatch& batch,
                         const LossWeights& weights, double epoch,
                         bool accumulate_grads);

// Supervised batch loss (SCE, or plain CE when use_sce is false) with
// backward; used by warmup and the baseline.
double supervised_loss(nn::Model& model, const Matrix& x,
                       const std::vector<int>& labels, const LossWeights& weights,
                       bool use_sce, bool accumulate_grads);

}  // namespace mdmx::losses
