#include "mdmx/selection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace mdmx::selection {

std::vector<double> knn_ood_scores(const Matrix& h, std::size_t k) {
  const std::size_t n = h.rows;
  if (k < 1 || k >= n)
    throw std::invalid_argument("knn_ood_scores: need 1 <= k <= N-1");

  std::vector<double> scores(n, 0.0);
  std::vector<std::pair<double, std::size_t>> dist;
  dist.reserve(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    dist.clear();
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      dist.emplace_back(std::sqrt(kernels::sqdist(h.row(i), h.row(j), h.cols)), j);
    }
    std::partial_sort(dist.begin(), dist.begin() + k, dist.end());
    double acc = 0.0;
    for (std::size_t m = 0; m < k; ++m) acc += dist[m].first;
    scores[i] = acc / static_cast<double>(k);
  }
  return scores;
}

std::vector<bool> ood_mask(const std::vector<double>& scores, double fraction) {
  if (fraction < 0.0 || fraction >= 1.0)
    throw std::invalid_argument("ood_mask: fraction must be in [0,1)");
  const std::size_t n = scores.size();
  const auto count = static_cast<std::size_t>(
      std::ceil(fraction * static_cast<double>(n) - 1e-12));

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  // highest score first; equal scores by smaller index
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] > scores[b];
  });
  std::vector<bool> mask(n, false);
  for (std::size_t m = 0; m < count; ++m) mask[order[m]] = true;
  return mask;
}

std::vector<double> per_sample_losses(const nn::Model& model, const Matrix& x,
                                      const std::vector<int>& labels) {
  Matrix h, logits;
  model.encode(x, h);
  model.classify(h, logits);
  std::vector<double> out(x.rows);
  for (std::size_t i = 0; i < x.rows; ++i) {
    const double* row = logits.row(i);
    double mx = row[0];
    for (std::size_t c = 1; c < logits.cols; ++c) mx = std::max(mx, row[c]);
    double denom = 0.0;
    for (std::size_t c = 0; c < logits.cols; ++c) denom += std::exp(row[c] - mx);
    out[i] = std::log(denom) - (row[labels[i]] - mx);
  }
  return out;
}

namespace {

double gauss_pdf(double x, double mean, double var) {
  const double d = x - mean;
  return std::exp(-0.5 * d * d / var) / std::sqrt(2.0 * M_PI * var);
}

}  // namespace

GmmFit fit_gmm_1d(const std::vector<double>& losses, int max_iters, double tol) {
  const std::size_t n = losses.size();
  if (n < 4) throw std::invalid_argument("fit_gmm_1d: need at least 4 samples");
  for (double l : losses)
    if (!std::isfinite(l)) throw std::invalid_argument("fit_gmm_1d: non-finite loss");

  GmmFit fit;
  const auto [mn_it, mx_it] = std::minmax_element(losses.begin(), losses.end());
  fit.loss_min = *mn_it;
  fit.loss_max = *mx_it;
  const double span = fit.loss_max - fit.loss_min;
  if (span < 1e-12) {
    fit.degenerate = true;
    fit.mean[0] = fit.mean[1] = fit.loss_min;
    return fit;
  }

  std::vector<double> t(n);
  for (std::size_t i = 0; i < n; ++i) t[i] = (losses[i] - fit.loss_min) / span;

  std::vector<double> sorted = t;
  std::sort(sorted.begin(), sorted.end());
  const double p10 = sorted[static_cast<std::size_t>(0.1 * (n - 1))];
  const double p90 = sorted[static_cast<std::size_t>(0.9 * (n - 1))];
  double mean = 0.0;
  for (double v : t) mean += v;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double v : t) var += (v - mean) * (v - mean);
  var = std::max(var / static_cast<double>(n), 1e-6);

  double mu[2] = {p10, p90};
  double sig2[2] = {var, var};
  double pi[2] = {0.5, 0.5};

  std::vector<double> resp(n);
  double prev_ll = -std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < max_iters; ++iter) {
    // E-step
    double ll = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double p0 = pi[0] * gauss_pdf(t[i], mu[0], sig2[0]);
      const double p1 = pi[1] * gauss_pdf(t[i], mu[1], sig2[1]);
      const double tot = p0 + p1 + 1e-300;
      resp[i] = p0 / tot;
      ll += std::log(tot);
    }
    fit.ll_trace.push_back(ll);
    fit.log_likelihood = ll;
    fit.iterations = iter + 1;
    if (ll - prev_ll < tol && iter > 0) break;
    prev_ll = ll;
    // M-step
    double n0 = 0.0, s0 = 0.0, s1 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      n0 += resp[i];
      s0 += resp[i] * t[i];
      s1 += (1.0 - resp[i]) * t[i];
    }
    const double n1 = static_cast<double>(n) - n0;
    mu[0] = s0 / std::max(n0, 1e-12);
    mu[1] = s1 / std::max(n1, 1e-12);
    double v0 = 0.0, v1 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      v0 += resp[i] * (t[i] - mu[0]) * (t[i] - mu[0]);
      v1 += (1.0 - resp[i]) * (t[i] - mu[1]) * (t[i] - mu[1]);
    }
    sig2[0] = std::max(v0 / std::max(n0, 1e-12), 1e-6);
    sig2[1] = std::max(v1 / std::max(n1, 1e-12), 1e-6);
    pi[0] = n0 / static_cast<double>(n);
    pi[1] = 1.0 - pi[0];
  }

  // component 0 is the lower mean
  int lo = mu[0] <= mu[1] ? 0 : 1;
  for (int c = 0; c < 2; ++c) {
    const int src = c == 0 ? lo : 1 - lo;
    fit.mean[c] = fit.loss_min + mu[src] * span;
    fit.var[c] = sig2[src] * span * span;
    fit.weight[c] = pi[src];
  }
  return fit;
}

double clean_posterior(const GmmFit& fit, double loss) {
  if (fit.degenerate) return 1.0;
  const double span = fit.loss_max - fit.loss_min;
  const double t = (loss - fit.loss_min) / span;
  const double m0 = (fit.mean[0] - fit.loss_min) / span;
  const double m1 = (fit.mean[1] - fit.loss_min) / span;
  const double v0 = fit.var[0] / (span * span);
  const double v1 = fit.var[1] / (span * span);
  const double p0 = fit.weight[0] * gauss_pdf(t, m0, v0);
  const double p1 = fit.weight[1] * gauss_pdf(t, m1, v1);
  return p0 / (p0 + p1 + 1e-300);
}

SplitResult split_clean_noisy(const std::vector<double>& w, double tau2,
                              const std::vector<std::size_t>& active) {
  if (tau2 <= 0.0 || tau2 >= 1.0)
    throw std::invalid_argument("split_clean_noisy: tau2 must be in (0,1)");
  SplitResult out;
  out.threshold = tau2;
  out.clean_probs = w;
  for (std::size_t pos = 0; pos < active.size(); ++pos) {
    if (w[pos] >= tau2)
      out.clean_idx.push_back(active[pos]);
    else
      out.noisy_idx.push_back(active[pos]);
  }
  return out;
}

}  // namespace mdmx::selection
