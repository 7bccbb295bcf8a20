#include "mdmx/losses.hpp"

#include <cmath>

#include "mdmx/contrastive.hpp"

namespace mdmx::losses {

void softmax_row(const double* logits, std::size_t c, double* out) {
  double mx = logits[0];
  for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, logits[j]);
  double denom = 0.0;
  for (std::size_t j = 0; j < c; ++j) {
    out[j] = std::exp(logits[j] - mx);
    denom += out[j];
  }
  for (std::size_t j = 0; j < c; ++j) out[j] /= denom;
}

double ce_loss_row(const double* logits, const double* target, std::size_t c,
                   double* grad_logits) {
  std::vector<double> p(c);
  softmax_row(logits, c, p.data());
  double loss = 0.0;
  for (std::size_t j = 0; j < c; ++j)
    if (target[j] > 0.0) loss -= target[j] * std::log(p[j] + 1e-300);
  if (grad_logits)
    for (std::size_t j = 0; j < c; ++j) grad_logits[j] = p[j] - target[j];
  return loss;
}

double sce_loss_row(const double* logits, const double* target, std::size_t c,
                    const LossWeights& w, double* grad_logits) {
  std::vector<double> p(c), m(c);
  softmax_row(logits, c, p.data());

  double ce = 0.0;
  for (std::size_t j = 0; j < c; ++j)
    if (target[j] > 0.0) ce -= target[j] * std::log(p[j] + 1e-300);

  // reverse term with clipped log target
  double pm = 0.0;
  for (std::size_t j = 0; j < c; ++j) {
    m[j] = target[j] > 0.0 ? std::max(std::log(target[j]), w.log_clip) : w.log_clip;
    pm += p[j] * m[j];
  }
  const double rce = -pm;

  if (grad_logits) {
    for (std::size_t j = 0; j < c; ++j) {
      grad_logits[j] = w.sce_alpha * (p[j] - target[j]) -
                       w.sce_beta * p[j] * (m[j] - pm);
    }
  }
  return w.sce_alpha * ce + w.sce_beta * rce;
}

double mse_prob_loss_row(const double* logits, const double* target, std::size_t c,
                         double* grad_logits) {
  std::vector<double> p(c);
  softmax_row(logits, c, p.data());
  double loss = 0.0;
  double pg = 0.0;
  std::vector<double> g(c);
  for (std::size_t j = 0; j < c; ++j) {
    g[j] = p[j] - target[j];
    loss += g[j] * g[j];
    pg += p[j] * g[j];
  }
  const double inv_c = 1.0 / static_cast<double>(c);
  if (grad_logits)
    for (std::size_t j = 0; j < c; ++j)
      grad_logits[j] = 2.0 * inv_c * p[j] * (g[j] - pg);
  return loss * inv_c;
}

SemiLossResult semi_loss(nn::Model& model, const SemiBatch& batch,
                         const LossWeights& weights, double epoch,
                         bool accumulate_grads) {
  const std::size_t pool = batch.pool_inputs.rows;
  const std::size_t labeled = batch.plan.labeled_items;
  const std::size_t unlabeled = pool - labeled;
  const std::size_t c = model.cfg.n_classes;
  const double lu = lambda_u_at(weights, epoch);

  // strong-view embeddings (shared by the embedding mix and the projections)
  nn::EncoderCache cache_pool;
  Matrix h_pool;
  model.encode(batch.pool_inputs, h_pool, accumulate_grads ? &cache_pool : nullptr);
  const Matrix h_mixed = mixematch::apply_mix(h_pool, batch.plan);

  Matrix logits_emb;
  model.classify(h_mixed, logits_emb);

  // input-space path on the mixed inputs
  nn::EncoderCache cache_in;
  Matrix h_in, logits_in;
  model.encode(batch.mixed_inputs, h_in, accumulate_grads ? &cache_in : nullptr);
  model.classify(h_in, logits_in);

  nn::ProjCache cache_z;
  Matrix z;
  model.project(h_pool, z, accumulate_grads ? &cache_z : nullptr);
  const auto self = contrastive::ntxent_loss(z, batch.ntxent_tau);

  SemiLossResult out;
  out.l_self = self.loss;

  Matrix dlogits_in(logits_in.rows, c), dlogits_emb(logits_emb.rows, c);
  std::vector<double> grow(c);
  const double inv_l = labeled > 0 ? 1.0 / static_cast<double>(labeled) : 0.0;
  const double inv_u = unlabeled > 0 ? 1.0 / static_cast<double>(unlabeled) : 0.0;

  for (std::size_t a = 0; a < pool; ++a) {
    const double* t = batch.mixed_targets.row(a);
    const bool is_labeled = a < labeled;
    const double scale = is_labeled ? inv_l : lu * inv_u;
    for (Matrix* logits : {&logits_in, &logits_emb}) {
      Matrix& dl = logits == &logits_in ? dlogits_in : dlogits_emb;
      double loss;
      if (is_labeled)
        loss = sce_loss_row(logits->row(a), t, c, weights, accumulate_grads ? grow.data() : nullptr);
      else
        loss = mse_prob_loss_row(logits->row(a), t, c, accumulate_grads ? grow.data() : nullptr);
      (is_labeled ? out.l_sup : out.l_unsup) += loss * (is_labeled ? inv_l : inv_u);
      if (accumulate_grads)
        for (std::size_t j = 0; j < c; ++j) dl.at(a, j) = grow[j] * scale;
    }
  }

  out.total = out.l_sup + lu * out.l_unsup + weights.lambda_c * out.l_self;

  if (accumulate_grads) {
    // input path
    Matrix dh_in;
    model.classify_backward(h_in, dlogits_in, dh_in);
    model.encode_backward(cache_in, dh_in);

    // embedding path: classifier grad scattered through the mix
    Matrix dh_mixed;
    model.classify_backward(h_mixed, dlogits_emb, dh_mixed);
    Matrix dh_pool(h_pool.rows, h_pool.cols);
    for (std::size_t a = 0; a < pool; ++a) {
      kernels::axpy(batch.plan.lambda[a], dh_mixed.row(a), dh_pool.row(a), h_pool.cols);
      kernels::axpy(1.0 - batch.plan.lambda[a], dh_mixed.row(a),
                    dh_pool.row(batch.plan.partner[a]), h_pool.cols);
    }

    // contrastive path
    Matrix dz = self.grad;
    kernels::scale(weights.lambda_c, dz.data.data(), dz.data.size());
    Matrix dh_proj;
    model.project_backward(cache_z, dz, dh_proj);
    for (std::size_t i = 0; i < dh_pool.data.size(); ++i)
      dh_pool.data[i] += dh_proj.data[i];

    model.encode_backward(cache_pool, dh_pool);
  }
  return out;
}

double supervised_loss(nn::Model& model, const Matrix& x,
                       const std::vector<int>& labels, const LossWeights& weights,
                       bool use_sce, bool accumulate_grads) {
  const std::size_t c = model.cfg.n_classes;
  nn::EncoderCache cache;
  Matrix h, logits;
  model.encode(x, h, accumulate_grads ? &cache : nullptr);
  model.classify(h, logits);

  Matrix dlogits(logits.rows, c);
  std::vector<double> target(c), grow(c);
  const double inv_n = 1.0 / static_cast<double>(x.rows);
  double total = 0.0;
  for (std::size_t i = 0; i < x.rows; ++i) {
    std::fill(target.begin(), target.end(), 0.0);
    target[labels[i]] = 1.0;
    const double loss =
        use_sce ? sce_loss_row(logits.row(i), target.data(), c, weights,
                               accumulate_grads ? grow.data() : nullptr)
                : ce_loss_row(logits.row(i), target.data(), c,
                              accumulate_grads ? grow.data() : nullptr);
    total += loss * inv_n;
    if (accumulate_grads)
      for (std::size_t j = 0; j < c; ++j) dlogits.at(i, j) = grow[j] * inv_n;
  }
  if (accumulate_grads) {
    Matrix dh;
    model.classify_backward(h, dlogits, dh);
    model.encode_backward(cache, dh);
  }
  return total;
}

}  // namespace mdmx::losses
