#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "mdmx/eval.hpp"
#include "test_helpers.hpp"

using namespace mdmx;
using namespace mdmx::eval;

TEST_CASE("accuracy agrees with a manual argmax over the model's own logits") {
  Rng rng(1);
  nn::ModelConfig cfg;
  cfg.input_dim = 2;
  cfg.hidden_dim = 6;
  cfg.embed_dim = 4;
  cfg.proj_hidden = 4;
  cfg.proj_dim = 3;
  cfg.n_classes = 4;
  nn::Model m;
  m.init(cfg, 3);

  const Matrix x = testutil::random_matrix(50, 2, rng, 2.0);
  std::vector<int> labels;
  for (int i = 0; i < 50; ++i) labels.push_back(static_cast<int>(rng.below(4)));

  Matrix h, logits;
  m.encode(x, h);
  m.classify(h, logits);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < 50; ++i) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < 4; ++c)
      if (logits.at(i, c) > logits.at(i, best)) best = c;
    correct += static_cast<int>(best) == labels[i];
  }
  CHECK(accuracy(m, x, labels) ==
        doctest::Approx(static_cast<double>(correct) / 50.0).epsilon(1e-12));
}

TEST_CASE("auroc hand cases") {
  // perfect separation
  CHECK(auroc({1, 2, 3, 4}, {false, false, true, true}) == doctest::Approx(1.0));
  // perfectly inverted
  CHECK(auroc({4, 3, 2, 1}, {false, false, true, true}) == doctest::Approx(0.0));
  // all tied -> chance
  CHECK(auroc({5, 5, 5, 5}, {true, false, true, false}) == doctest::Approx(0.5));
  // one concordant, one discordant pair of pairs
  CHECK(auroc({1, 2, 3}, {false, true, false}) == doctest::Approx(0.5));
  // mixed ties: positive tied with one negative
  // pairs: (2 vs 1) win, (2 vs 2) half -> 0.75
  CHECK(auroc({1, 2, 2}, {false, false, true}) == doctest::Approx(0.75));
}

TEST_CASE("auroc matches a pair-counting oracle on random data") {
  Rng rng(2);
  for (int t = 0; t < 50; ++t) {
    const std::size_t n = 10 + rng.below(60);
    std::vector<double> scores(n);
    std::vector<bool> pos(n);
    std::size_t np = 0;
    for (std::size_t i = 0; i < n; ++i) {
      scores[i] = static_cast<double>(rng.below(8));  // plenty of ties
      pos[i] = rng.uniform() < 0.4;
      np += pos[i];
    }
    if (np == 0 || np == n) continue;
    double wins = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!pos[i]) continue;
      for (std::size_t j = 0; j < n; ++j) {
        if (pos[j]) continue;
        ++pairs;
        if (scores[i] > scores[j]) wins += 1.0;
        else if (scores[i] == scores[j]) wins += 0.5;
      }
    }
    CHECK(auroc(scores, pos) ==
          doctest::Approx(wins / static_cast<double>(pairs)).epsilon(1e-12));
  }
}

TEST_CASE("auroc needs both classes") {
  CHECK_THROWS_AS(auroc({1, 2}, {true, true}), std::invalid_argument);
  CHECK_THROWS_AS(auroc({1, 2}, {false, false}), std::invalid_argument);
}

TEST_CASE("selection precision and recall on a hand fixture") {
  // truth: 0,1,2 clean; 3 id-noise; 4 ood
  std::vector<datagen::GroundTruth> truth(5);
  truth[3].kind = datagen::NoiseKind::id_noise;
  truth[4] = {-1, datagen::NoiseKind::ood};

  const std::vector<std::size_t> active = {0, 1, 2, 3};  // 4 masked out already
  const std::vector<std::size_t> clean_idx = {0, 1, 3};  // 2 hits of 3 picks
  const auto pr = selection_prf(clean_idx, active, truth);
  CHECK(pr.precision == doctest::Approx(2.0 / 3.0));
  CHECK(pr.recall == doctest::Approx(2.0 / 3.0));  // 3 truly clean in active
  CHECK(!pr.empty_selection);

  const auto empty = selection_prf({}, active, truth);
  CHECK(empty.empty_selection);
  CHECK(empty.precision == 0.0);
  CHECK(empty.recall == 0.0);
}

TEST_CASE("metrics json line has the fixed layout") {
  MetricsRecord r;
  r.round = 2;
  r.epoch = 17;
  r.l_sup = 0.5;
  r.l_unsup = 0.25;
  r.l_self = 4.0;
  r.test_acc = 0.875;
  r.ood_auroc = 0.96875;
  // sel_p / sel_r unset -> null
  CHECK(to_json_line(r) ==
        "{\"v\":1,\"round\":2,\"epoch\":17,\"l_sup\":0.5,\"l_unsup\":0.25,"
        "\"l_self\":4,\"test_acc\":0.875,\"ood_auroc\":0.96875,"
        "\"sel_p\":null,\"sel_r\":null}");
}

TEST_CASE("metrics writer / reader round trip") {
  namespace fs = std::filesystem;
  const auto path = (fs::temp_directory_path() / "mdmx_eval_metrics.jsonl").string();

  Rng rng(5);
  std::vector<MetricsRecord> want;
  {
    MetricsWriter w(path);
    for (int i = 0; i < 5; ++i) {
      MetricsRecord r;
      r.round = i % 2;
      r.epoch = i;
      r.l_sup = rng.normal();
      r.l_unsup = rng.normal();
      r.l_self = rng.normal();
      r.test_acc = rng.uniform();
      if (i == 2) {
        r.ood_auroc = rng.uniform();
        r.sel_p = rng.uniform();
        r.sel_r = rng.uniform();
      }
      w.write(r);
      want.push_back(r);
    }
    w.flush();
  }
  const auto got = read_metrics(path);
  REQUIRE(got.size() == want.size());
  for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i] == want[i]);
  std::remove(path.c_str());
}

TEST_CASE("metrics reader rejects malformed input with a line number") {
  namespace fs = std::filesystem;
  const auto path = (fs::temp_directory_path() / "mdmx_eval_bad.jsonl").string();

  {
    std::ofstream f(path);
    f << to_json_line(MetricsRecord{}) << "\n";
    f << "not json\n";
  }
  CHECK_THROWS_WITH_AS(read_metrics(path), doctest::Contains(":2"),
                       std::runtime_error);

  {
    std::ofstream f(path);
    f << "{\"v\":2}\n";
  }
  CHECK_THROWS_WITH_AS(read_metrics(path), doctest::Contains("version"),
                       std::runtime_error);

  {
    std::ofstream f(path);
    f << "{\"v\":1,\"round\":0}\n";
  }
  CHECK_THROWS_WITH_AS(read_metrics(path), doctest::Contains("missing field"),
                       std::runtime_error);
  std::remove(path.c_str());
}
