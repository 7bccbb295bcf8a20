#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mdmx/losses.hpp"
#include "mdmx/mixematch.hpp"
#include "test_helpers.hpp"

using namespace mdmx;
using namespace mdmx::mixematch;

namespace {

std::vector<double> random_simplex(std::size_t c, Rng& rng) {
  std::vector<double> p(c);
  double s = 0.0;
  for (double& v : p) {
    v = rng.uniform_pos();
    s += v;
  }
  for (double& v : p) v /= s;
  return p;
}

bool on_simplex(const double* p, std::size_t c, double tol = 1e-9) {
  double s = 0.0;
  for (std::size_t j = 0; j < c; ++j) {
    if (p[j] < -tol) return false;
    s += p[j];
  }
  return std::abs(s - 1.0) <= tol;
}

}  // namespace

TEST_CASE("sharpen with T = 1 is the identity") {
  Rng rng(1);
  for (int t = 0; t < 100; ++t) {
    const auto p = random_simplex(5, rng);
    const auto q = sharpen(p, 1.0);
    for (std::size_t j = 0; j < p.size(); ++j)
      CHECK(q[j] == doctest::Approx(p[j]).epsilon(1e-12));
  }
}

TEST_CASE("sharpen preserves argmax, lands on the simplex, lowers entropy") {
  Rng rng(2);
  for (int t = 0; t < 10000; ++t) {
    const auto p = random_simplex(4, rng);
    const auto q = sharpen(p, 0.5);
    CHECK(on_simplex(q.data(), q.size()));
    const auto am_p = std::max_element(p.begin(), p.end()) - p.begin();
    const auto am_q = std::max_element(q.begin(), q.end()) - q.begin();
    CHECK(am_p == am_q);
  }
  // spot-check the closed form on a known vector: p^2 renormalized
  const std::vector<double> p = {0.5, 0.3, 0.2};
  const auto q = sharpen(p, 0.5);
  const double z = 0.25 + 0.09 + 0.04;
  CHECK(q[0] == doctest::Approx(0.25 / z).epsilon(1e-12));
  CHECK(q[1] == doctest::Approx(0.09 / z).epsilon(1e-12));
  CHECK(q[2] == doctest::Approx(0.04 / z).epsilon(1e-12));
}

TEST_CASE("sampled lambda prime always lies in [0.5, 1]") {
  Rng rng(3);
  double lo = 1.0, hi = 0.0;
  for (int t = 0; t < 100000; ++t) {
    const double l = sample_lambda(4.0, rng);
    REQUIRE(l >= 0.5);
    REQUIRE(l <= 1.0);
    lo = std::min(lo, l);
    hi = std::max(hi, l);
  }
  // Beta(4,4) folded onto [0.5, 1] actually covers the range
  CHECK(lo < 0.55);
  CHECK(hi > 0.9);
}

TEST_CASE("mix is the convex combination") {
  const std::vector<double> a = {1.0, 2.0, 3.0};
  const std::vector<double> b = {-1.0, 0.0, 5.0};
  const auto m = mix(a, b, 0.75);
  CHECK(m[0] == doctest::Approx(0.5));
  CHECK(m[1] == doctest::Approx(1.5));
  CHECK(m[2] == doctest::Approx(3.5));
}

TEST_CASE("guess_labels sharpens the mean weak softmax") {
  Rng rng(4);
  Matrix w1 = testutil::random_matrix(3, 4, rng);
  Matrix w2 = testutil::random_matrix(3, 4, rng);
  const Matrix q = guess_labels(w1, w2, 0.5);
  REQUIRE(q.rows == 3);
  REQUIRE(q.cols == 4);
  for (std::size_t i = 0; i < 3; ++i) {
    std::vector<double> p1(4), p2(4), m(4);
    losses::softmax_row(w1.row(i), 4, p1.data());
    losses::softmax_row(w2.row(i), 4, p2.data());
    for (int j = 0; j < 4; ++j) m[j] = 0.5 * (p1[j] + p2[j]);
    const auto want = sharpen(m, 0.5);
    for (int j = 0; j < 4; ++j)
      CHECK(q.at(i, j) == doctest::Approx(want[j]).epsilon(1e-12));
    CHECK(on_simplex(q.row(i), 4));
  }
}

TEST_CASE("refine_label blends the one-hot with the mean weak prediction") {
  const std::vector<double> pred = {0.1, 0.2, 0.3, 0.4};
  const auto t = refine_label(2, 4, 0.75, pred);
  CHECK(t[0] == doctest::Approx(0.25 * 0.1));
  CHECK(t[1] == doctest::Approx(0.25 * 0.2));
  CHECK(t[2] == doctest::Approx(0.75 + 0.25 * 0.3));
  CHECK(t[3] == doctest::Approx(0.25 * 0.4));
  CHECK(on_simplex(t.data(), 4));

  // w = 1 gives the exact one-hot
  const auto hard = refine_label(1, 4, 1.0, pred);
  CHECK(hard[1] == doctest::Approx(1.0));
}

TEST_CASE("draw_plan: lambdas valid, partner is a permutation, deterministic") {
  Rng rng(5);
  const auto plan = draw_plan(6, 10, 4.0, rng);
  CHECK(plan.labeled_items == 6);
  REQUIRE(plan.lambda.size() == 16);
  REQUIRE(plan.partner.size() == 16);
  for (double l : plan.lambda) {
    CHECK(l >= 0.5);
    CHECK(l <= 1.0);
  }
  auto sorted = plan.partner;
  std::sort(sorted.begin(), sorted.end());
  std::vector<std::size_t> want(16);
  std::iota(want.begin(), want.end(), std::size_t{0});
  CHECK(sorted == want);

  Rng rng2(5);
  const auto again = draw_plan(6, 10, 4.0, rng2);
  CHECK(again.lambda == plan.lambda);
  CHECK(again.partner == plan.partner);
}

TEST_CASE("apply_mix follows the plan row by row") {
  Rng rng(6);
  const Matrix rows = testutil::random_matrix(8, 3, rng);
  const auto plan = draw_plan(4, 4, 4.0, rng);
  const Matrix out = apply_mix(rows, plan);
  for (std::size_t i = 0; i < 8; ++i)
    for (std::size_t j = 0; j < 3; ++j) {
      const double want = plan.lambda[i] * rows.at(i, j) +
                          (1.0 - plan.lambda[i]) * rows.at(plan.partner[i], j);
      CHECK(out.at(i, j) == doctest::Approx(want).epsilon(1e-12));
    }
}

TEST_CASE("mixematch output shapes and simplex targets") {
  Rng rng(7);
  const std::size_t dim = 3, c = 4;
  const Matrix xs = testutil::random_matrix(4, dim, rng);   // 2 labeled samples
  const Matrix us = testutil::random_matrix(6, dim, rng);   // 3 unlabeled
  const Matrix hx = testutil::random_matrix(4, 5, rng);
  const Matrix hu = testutil::random_matrix(6, 5, rng);
  Matrix tx(4, c), tu(6, c);
  for (std::size_t i = 0; i < 4; ++i) {
    const auto p = random_simplex(c, rng);
    std::copy(p.begin(), p.end(), tx.row(i));
  }
  for (std::size_t i = 0; i < 6; ++i) {
    const auto p = random_simplex(c, rng);
    std::copy(p.begin(), p.end(), tu.row(i));
  }

  MixParams params;
  const auto batch = mdmx::mixematch::mixematch(xs, us, hx, hu, tx, tu, params, rng);
  CHECK(batch.x.rows == 10);
  CHECK(batch.x.cols == dim);
  CHECK(batch.h.rows == 10);
  CHECK(batch.h.cols == 5);
  CHECK(batch.targets.rows == 10);
  CHECK(batch.plan.labeled_items == 4);
  for (std::size_t i = 0; i < 10; ++i)
    CHECK(on_simplex(batch.targets.row(i), c));

  // input and embedding mixes of an item share the same lambda
  for (std::size_t i = 0; i < 10; ++i) {
    const double l = batch.plan.lambda[i];
    const std::size_t p = batch.plan.partner[i];
    const double xi = i < 4 ? xs.at(i, 0) : us.at(i - 4, 0);
    const double xp = p < 4 ? xs.at(p, 0) : us.at(p - 4, 0);
    CHECK(batch.x.at(i, 0) == doctest::Approx(l * xi + (1 - l) * xp).epsilon(1e-12));
    const double hi = i < 4 ? hx.at(i, 0) : hu.at(i - 4, 0);
    const double hp = p < 4 ? hx.at(p, 0) : hu.at(p - 4, 0);
    CHECK(batch.h.at(i, 0) == doctest::Approx(l * hi + (1 - l) * hp).epsilon(1e-12));
  }
}

TEST_CASE("empty unlabeled pool degenerates to labeled-only mixing") {
  Rng rng(8);
  const auto plan = draw_plan(4, 0, 4.0, rng);
  CHECK(plan.lambda.size() == 4);
  for (std::size_t p : plan.partner) CHECK(p < 4);
}

TEST_CASE("parameter validation") {
  MixParams bad;
  bad.T = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = MixParams{};
  bad.alpha = -1.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}
