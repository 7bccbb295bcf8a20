#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mdmx/nn.hpp"
#include "test_helpers.hpp"

using namespace mdmx;
using namespace mdmx::nn;

namespace {

Model small_model(std::uint64_t seed = 1) {
  ModelConfig cfg;
  cfg.input_dim = 3;
  cfg.hidden_dim = 5;
  cfg.embed_dim = 4;
  cfg.proj_hidden = 4;
  cfg.proj_dim = 3;
  cfg.n_classes = 3;
  Model m;
  m.init(cfg, seed);
  return m;
}

}  // namespace

TEST_CASE("forward pass matches the straight-line oracle") {
  Rng rng(2);
  Model m = small_model();
  Matrix x = testutil::random_matrix(6, 3, rng);

  Matrix h, z, logits;
  m.encode(x, h);
  m.project(h, z);
  m.classify(h, logits);

  for (std::size_t i = 0; i < x.rows; ++i) {
    std::vector<double> xi(x.row(i), x.row(i) + x.cols);
    const auto oh = testutil::forward_oracle_row(m, xi, /*with_projection=*/false);
    const auto oz = testutil::forward_oracle_row(m, xi, /*with_projection=*/true);
    for (std::size_t j = 0; j < h.cols; ++j)
      CHECK(h.at(i, j) == doctest::Approx(oh[j]).epsilon(1e-12));
    for (std::size_t j = 0; j < z.cols; ++j)
      CHECK(z.at(i, j) == doctest::Approx(oz[j]).epsilon(1e-12));
    // classifier is one dense layer on h
    for (std::size_t o = 0; o < logits.cols; ++o) {
      double acc = m.cls.b[o];
      for (std::size_t j = 0; j < h.cols; ++j) acc += m.cls.W.at(o, j) * oh[j];
      CHECK(logits.at(i, o) == doctest::Approx(acc).epsilon(1e-12));
    }
  }
}

TEST_CASE("projection rows come out unit norm") {
  Rng rng(4);
  Model m = small_model();
  Matrix x = testutil::random_matrix(8, 3, rng, 2.0);
  Matrix h, z;
  m.encode(x, h);
  m.project(h, z);
  for (std::size_t i = 0; i < z.rows; ++i) {
    double n2 = 0.0;
    for (std::size_t j = 0; j < z.cols; ++j) n2 += z.at(i, j) * z.at(i, j);
    CHECK(std::abs(n2 - 1.0) < 1e-9);
  }
}

TEST_CASE("encoder gradients match finite differences") {
  Rng rng(6);
  Model m = small_model();
  const Matrix x = testutil::random_matrix(4, 3, rng);

  // quadratic head on embeddings: loss = 0.5 sum h^2, dh = h
  auto loss_fn = [&]() {
    Matrix h;
    m.encode(x, h);
    double s = 0.0;
    for (double v : h.data) s += 0.5 * v * v;
    return s;
  };
  auto backward_fn = [&]() {
    EncoderCache ec;
    Matrix h;
    m.encode(x, h, &ec);
    m.encode_backward(ec, h);
  };
  CHECK(testutil::fd_check(m, loss_fn, backward_fn) < 1e-5);
}

TEST_CASE("projection gradients (through the normalize) match finite differences") {
  Rng rng(8);
  Model m = small_model();
  const Matrix x = testutil::random_matrix(4, 3, rng);
  const Matrix c = testutil::random_matrix(4, 3, rng);  // fixed linear functional

  auto loss_fn = [&]() {
    Matrix h, z;
    m.encode(x, h);
    m.project(h, z);
    double s = 0.0;
    for (std::size_t i = 0; i < z.data.size(); ++i) s += c.data[i] * z.data[i];
    return s;
  };
  auto backward_fn = [&]() {
    EncoderCache ec;
    ProjCache pc;
    Matrix h, z, dh;
    m.encode(x, h, &ec);
    m.project(h, z, &pc);
    m.project_backward(pc, c, dh);
    m.encode_backward(ec, dh);
  };
  CHECK(testutil::fd_check(m, loss_fn, backward_fn) < 1e-5);
}

TEST_CASE("classifier gradients match finite differences") {
  Rng rng(10);
  Model m = small_model();
  const Matrix x = testutil::random_matrix(4, 3, rng);
  const Matrix c = testutil::random_matrix(4, 3, rng);

  auto loss_fn = [&]() {
    Matrix h, logits;
    m.encode(x, h);
    m.classify(h, logits);
    double s = 0.0;
    for (std::size_t i = 0; i < logits.data.size(); ++i)
      s += c.data[i] * logits.data[i];
    return s;
  };
  auto backward_fn = [&]() {
    EncoderCache ec;
    Matrix h, logits, dh;
    m.encode(x, h, &ec);
    m.classify(h, logits);
    m.classify_backward(h, c, dh);
    m.encode_backward(ec, dh);
  };
  CHECK(testutil::fd_check(m, loss_fn, backward_fn) < 1e-5);
}

TEST_CASE("cosine schedule endpoints and midpoint") {
  CHECK(cosine_lr(0.1, 0, 100) == doctest::Approx(0.1));
  CHECK(cosine_lr(0.1, 100, 100) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(cosine_lr(0.1, 50, 100) == doctest::Approx(0.05));
}

TEST_CASE("sgd step applies the momentum update formula") {
  Model m = small_model();
  SgdConfig opt;
  opt.momentum = 0.9;
  opt.weight_decay = 0.01;
  opt.lr_classifier = 0.5;
  opt.lr_backbone = 0.25;

  // snapshot, set grads to known values, take one step from zero momentum
  m.zero_grad();
  std::vector<std::vector<double>> p0;
  for (auto t : m.tensors()) {
    p0.push_back(*t.p);
    for (double& g : *t.g) g = 0.125;
  }
  sgd_step(m, opt, 1.0);
  std::size_t ti = 0;
  for (auto t : m.tensors()) {
    const double lr = t.classifier_group ? opt.lr_classifier : opt.lr_backbone;
    for (std::size_t i = 0; i < t.p->size(); ++i) {
      const double v = 0.125 + opt.weight_decay * p0[ti][i];
      CHECK((*t.p)[i] == doctest::Approx(p0[ti][i] - lr * v).epsilon(1e-12));
      CHECK((*t.m)[i] == doctest::Approx(v).epsilon(1e-12));
    }
    ++ti;
  }
}

TEST_CASE("frozen parameter groups are left untouched") {
  Model m = small_model();
  SgdConfig opt;
  m.zero_grad();
  for (auto t : m.tensors())
    for (double& g : *t.g) g = 1.0;
  std::vector<std::vector<double>> p0, m0;
  for (auto t : m.tensors()) {
    p0.push_back(*t.p);
    m0.push_back(*t.m);
  }

  sgd_step(m, opt, 1.0, /*backbone=*/true, /*classifier=*/false);
  std::size_t ti = 0;
  for (auto t : m.tensors()) {
    if (t.classifier_group) {
      CHECK(*t.p == p0[ti]);
      CHECK(*t.m == m0[ti]);
    } else {
      CHECK(*t.p != p0[ti]);
    }
    ++ti;
  }
}

TEST_CASE("sgd step rejects non-finite gradients") {
  Model m = small_model();
  m.zero_grad();
  m.enc1.gW.at(0, 0) = std::nan("");
  CHECK_THROWS_WITH_AS(sgd_step(m, SgdConfig{}, 1.0),
                       doctest::Contains("enc1"), std::runtime_error);
}

TEST_CASE("checkpoint round trip restores parameters, momentum and rng state") {
  namespace fs = std::filesystem;
  const auto path = (fs::temp_directory_path() / "mdmx_nn_ckpt_test.ckpt").string();

  Model m = small_model(3);
  // give momentum buffers non-trivial content
  m.zero_grad();
  for (auto t : m.tensors())
    for (double& g : *t.g) g = 0.01;
  sgd_step(m, SgdConfig{}, 1.0);

  save_checkpoint(m, 0xdeadbeefULL, path);

  Model other = small_model(99);  // different init
  const std::uint64_t rng_state = load_checkpoint(other, path);
  CHECK(rng_state == 0xdeadbeefULL);

  auto ta = m.tensors();
  auto tb = other.tensors();
  REQUIRE(ta.size() == tb.size());
  for (std::size_t i = 0; i < ta.size(); ++i) {
    CHECK(*ta[i].p == *tb[i].p);
    CHECK(*ta[i].m == *tb[i].m);
  }
  std::remove(path.c_str());
}

TEST_CASE("checkpoint loader rejects wrong magic, adopts the stored shape") {
  namespace fs = std::filesystem;
  const auto path = (fs::temp_directory_path() / "mdmx_nn_bad_ckpt.ckpt").string();
  {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    std::fputs("NOT-A-CKPT\n", f);
    std::fclose(f);
  }
  Model m = small_model();
  CHECK_THROWS_AS(load_checkpoint(m, path), std::runtime_error);

  // the checkpoint is self-describing: a differently shaped model is re-built
  save_checkpoint(m, 1, path);
  ModelConfig big;
  big.input_dim = 7;
  Model wide;
  wide.init(big, 0);
  load_checkpoint(wide, path);
  CHECK(wide.cfg.input_dim == m.cfg.input_dim);
  CHECK(wide.enc1.W == m.enc1.W);

  // a truncated file does throw
  const auto all = [&] {
    std::ifstream f(path, std::ios::binary);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
  }();
  {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    f.write(all.data(), static_cast<std::streamsize>(all.size() / 2));
  }
  CHECK_THROWS_AS(load_checkpoint(wide, path), std::runtime_error);
  std::remove(path.c_str());
}
