#include "mdmx/mixematch.hpp"

#include <cmath>

namespace mdmx::mixematch {

namespace {

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

}  // namespace

std::vector<double> sharpen(const std::vector<double>& p, double temperature) {
  std::vector<double> q(p.size());
  double denom = 0.0;
  for (std::size_t j = 0; j < p.size(); ++j) {
    q[j] = std::pow(p[j], 1.0 / temperature);
    denom += q[j];
  }
  for (double& v : q) v /= denom;
  return q;
}

double sample_lambda(double alpha, Rng& rng) {
  const double l = rng.beta(alpha, alpha);
  return std::max(l, 1.0 - l);
}

std::vector<double> mix(const std::vector<double>& a1, const std::vector<double>& a2,
                        double lambda_prime) {
  if (a1.size() != a2.size())
    throw std::invalid_argument("mix: shape mismatch");
  std::vector<double> out(a1.size());
  for (std::size_t j = 0; j < a1.size(); ++j)
    out[j] = lambda_prime * a1[j] + (1.0 - lambda_prime) * a2[j];
  return out;
}

Matrix guess_labels(const Matrix& weak1_logits, const Matrix& weak2_logits,
                    double temperature) {
  Matrix q(weak1_logits.rows, weak1_logits.cols);
  std::vector<double> p1(q.cols), p2(q.cols), avg(q.cols);
  for (std::size_t i = 0; i < q.rows; ++i) {
    softmax_row(weak1_logits.row(i), q.cols, p1.data());
    softmax_row(weak2_logits.row(i), q.cols, p2.data());
    for (std::size_t j = 0; j < q.cols; ++j) avg[j] = 0.5 * (p1[j] + p2[j]);
    const auto s = sharpen(avg, temperature);
    std::copy(s.begin(), s.end(), q.row(i));
  }
  return q;
}

std::vector<double> refine_label(int y, int n_classes, double w,
                                 const std::vector<double>& weak_pred_mean) {
  std::vector<double> out(n_classes);
  for (int j = 0; j < n_classes; ++j)
    out[j] = w * (j == y ? 1.0 : 0.0) + (1.0 - w) * weak_pred_mean[j];
  return out;
}

MixPlan draw_plan(std::size_t labeled_items, std::size_t unlabeled_items,
                  double alpha, Rng& rng) {
  const std::size_t p = labeled_items + unlabeled_items;
  MixPlan plan;
  plan.labeled_items = labeled_items;
  plan.lambda.resize(p);
  plan.partner.resize(p);
  for (std::size_t a = 0; a < p; ++a) plan.lambda[a] = sample_lambda(alpha, rng);
  for (std::size_t a = 0; a < p; ++a) plan.partner[a] = a;
  for (std::size_t a = 0; a + 1 < p; ++a) {
    const std::size_t j = a + rng.below(p - a);
    std::swap(plan.partner[a], plan.partner[j]);
  }
  return plan;
}

Matrix apply_mix(const Matrix& rows, const MixPlan& plan) {
  Matrix out(rows.rows, rows.cols);
  for (std::size_t a = 0; a < rows.rows; ++a) {
    const double l = plan.lambda[a];
    const double* r1 = rows.row(a);
    const double* r2 = rows.row(plan.partner[a]);
    double* o = out.row(a);
    for (std::size_t j = 0; j < rows.cols; ++j) o[j] = l * r1[j] + (1.0 - l) * r2[j];
  }
  return out;
}

MixedBatch mixematch(const Matrix& x_strong, const Matrix& u_strong,
                     const Matrix& h_x, const Matrix& h_u,
                     const Matrix& targets_x, const Matrix& targets_u,
                     const MixParams& params, Rng& rng) {
  params.validate();
  const std::size_t l = x_strong.rows;
  const std::size_t u = u_strong.rows;

  auto stack = [](const Matrix& a, const Matrix& b) {
    if (b.rows == 0) return a;
    Matrix out(a.rows + b.rows, a.cols);
    std::copy(a.data.begin(), a.data.end(), out.data.begin());
    std::copy(b.data.begin(), b.data.end(), out.data.begin() + a.data.size());
    return out;
  };

  const Matrix pool_x = stack(x_strong, u_strong);
  const Matrix pool_h = stack(h_x, h_u);
  const Matrix pool_t = stack(targets_x, targets_u);

  MixedBatch out;
  out.plan = draw_plan(l, u, params.alpha, rng);
  out.x = apply_mix(pool_x, out.plan);
  out.h = apply_mix(pool_h, out.plan);
  out.targets = apply_mix(pool_t, out.plan);
  return out;
}

}  // namespace mdmx::mixematch
