#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "mdmx/config.hpp"
#include "mdmx/datagen.hpp"

using namespace mdmx;
using namespace mdmx::datagen;

namespace {

std::string tmp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream f(path);
  f << content;
}

}  // namespace

TEST_CASE("dataset save / load round trip is exact, truth included") {
  const auto path = tmp_path("mdmx_io_ds.csv");
  const auto clean = make_blobs(20, 3, 2, 1.0, 5);
  auto ds = inject_id_noise(clean, 0.3, IdNoiseMode::symmetric, 6);
  ds = inject_ood_noise(ds, 0.2, OodSource::uniform_ring, blob_radius(1.0), 7);

  save_dataset(ds, path);
  const auto back = load_dataset(path);

  CHECK(back.features == ds.features);  // 17 digits round-trip doubles exactly
  CHECK(back.given_labels == ds.given_labels);
  CHECK(back.n_classes == ds.n_classes);
  CHECK(back.dim == ds.dim);
  REQUIRE(back.truth.has_value());
  REQUIRE(back.truth->size() == ds.truth->size());
  for (std::size_t i = 0; i < back.truth->size(); ++i) {
    CHECK((*back.truth)[i].true_label == (*ds.truth)[i].true_label);
    CHECK((*back.truth)[i].kind == (*ds.truth)[i].kind);
  }
  std::remove(path.c_str());
  std::remove(tmp_path("mdmx_io_ds.truth.csv").c_str());
}

TEST_CASE("missing truth sidecar is fine") {
  const auto path = tmp_path("mdmx_io_notruth.csv");
  write_file(path,
             "feat_0,feat_1,label\n"
             "1.5,-2.0,0\n"
             "0.25,3.0,2\n");
  const auto ds = load_dataset(path);
  CHECK(ds.features.rows == 2);
  CHECK(ds.dim == 2);
  CHECK(ds.given_labels == std::vector<int>{0, 2});
  CHECK(ds.n_classes == 3);  // inferred from max label
  CHECK(!ds.truth.has_value());
  std::remove(path.c_str());
}

TEST_CASE("load_dataset validation errors carry file and line") {
  const auto path = tmp_path("mdmx_io_bad.csv");

  write_file(path, "feat_0,feat_1,label\n1.0,2.0,0\nnope,2.0,1\n");
  CHECK_THROWS_WITH_AS(load_dataset(path), doctest::Contains(":3"),
                       std::runtime_error);

  write_file(path, "feat_0,feat_1,label\n1.0,0\n");
  CHECK_THROWS_WITH_AS(load_dataset(path), doctest::Contains("fields"),
                       std::runtime_error);

  write_file(path, "x,y,label\n1.0,2.0,0\n");
  CHECK_THROWS_AS(load_dataset(path), std::runtime_error);

  // label out of range against a declared class count
  write_file(path, "feat_0,feat_1,label\n1.0,2.0,7\n");
  CHECK_THROWS_WITH_AS(load_dataset(path, 4), doctest::Contains("n_classes"),
                       std::runtime_error);

  write_file(path, "feat_0,feat_1,label\n1.0,2.0,-1\n");
  CHECK_THROWS_AS(load_dataset(path), std::runtime_error);
  std::remove(path.c_str());
}

TEST_CASE("truth sidecar validation") {
  const auto path = tmp_path("mdmx_io_t.csv");
  const auto tpath = tmp_path("mdmx_io_t.truth.csv");
  write_file(path, "feat_0,feat_1,label\n1.0,2.0,0\n3.0,4.0,1\n");

  // row count mismatch
  write_file(tpath, "true_label,kind\n0,clean\n");
  CHECK_THROWS_WITH_AS(load_dataset(path), doctest::Contains("row count"),
                       std::runtime_error);

  // ood rows must carry true_label -1, and vice versa
  write_file(tpath, "true_label,kind\n0,clean\n1,ood\n");
  CHECK_THROWS_WITH_AS(load_dataset(path), doctest::Contains("mismatch"),
                       std::runtime_error);

  write_file(tpath, "true_label,kind\n0,clean\n-1,weird\n");
  CHECK_THROWS_AS(load_dataset(path), std::runtime_error);

  write_file(tpath, "true_label,kind\n0,clean\n-1,ood\n");
  const auto ds = load_dataset(path);
  REQUIRE(ds.truth.has_value());
  CHECK((*ds.truth)[1].kind == NoiseKind::ood);
  std::remove(path.c_str());
  std::remove(tpath.c_str());
}

TEST_CASE("config round trip preserves every field") {
  config::ExperimentConfig cfg;
  cfg.data.n_per_class = 123;
  cfg.data.spread = 1.75;
  cfg.noise.r_in = 0.4;
  cfg.noise.r_out = 0.2;
  cfg.noise.id_mode = IdNoiseMode::asymmetric;
  cfg.noise.ood_source = OodSource::shifted_blobs;
  cfg.pipe.epochs_ssl = 17;
  cfg.pipe.ssl_tau = 0.37;
  cfg.pipe.loss.lambda_u = 12.5;
  cfg.pipe.opt.lr_backbone = 0.0025;
  cfg.pipe.warmup_freeze_backbone = true;
  cfg.pipe.seed = 987654321;
  cfg.dataset = "my_train.csv";

  const auto text = config::serialize_config(cfg);
  const auto back = config::parse_config(text, "roundtrip");
  CHECK(back.data.n_per_class == 123);
  CHECK(back.data.spread == 1.75);
  CHECK(back.noise.r_in == 0.4);
  CHECK(back.noise.id_mode == IdNoiseMode::asymmetric);
  CHECK(back.noise.ood_source == OodSource::shifted_blobs);
  CHECK(back.pipe.epochs_ssl == 17);
  CHECK(back.pipe.ssl_tau == 0.37);
  CHECK(back.pipe.loss.lambda_u == 12.5);
  CHECK(back.pipe.opt.lr_backbone == 0.0025);
  CHECK(back.pipe.warmup_freeze_backbone);
  CHECK(back.pipe.seed == 987654321);
  CHECK(back.dataset == "my_train.csv");
  // serialized form is a fixed point
  CHECK(config::serialize_config(back) == text);
}

TEST_CASE("config parser rejects unknown keys by name with file and line") {
  const std::string text =
      "[pipeline]\n"
      "epochs_ssl = 5\n"
      "no_such_key = 1\n";
  CHECK_THROWS_WITH_AS(config::parse_config(text, "test.ini"),
                       doctest::Contains("test.ini:3"), std::runtime_error);
  CHECK_THROWS_WITH_AS(config::parse_config(text, "test.ini"),
                       doctest::Contains("pipeline.no_such_key"), std::runtime_error);
}

TEST_CASE("config parser rejects malformed values and sections") {
  CHECK_THROWS_WITH_AS(
      config::parse_config("[pipeline]\nepochs_ssl = many\n", "t"),
      doctest::Contains("bad integer"), std::runtime_error);
  CHECK_THROWS_WITH_AS(config::parse_config("[oops\n", "t"),
                       doctest::Contains("section"), std::runtime_error);
  CHECK_THROWS_WITH_AS(config::parse_config("[data]\njust a line\n", "t"),
                       doctest::Contains("key = value"), std::runtime_error);
}

TEST_CASE("config validation rejects inconsistent settings") {
  CHECK_THROWS_AS(
      config::parse_config("[noise]\nr_in = 0.8\nr_out = 0.5\n", "t"),
      std::runtime_error);
  CHECK_THROWS_AS(config::parse_config("[pipeline]\ntau2 = 1.5\n", "t"),
                  std::runtime_error);
  CHECK_THROWS_AS(config::parse_config("[optim]\nbatch_size = 1\n", "t"),
                  std::runtime_error);
}

TEST_CASE("comments and blank lines are ignored") {
  const auto cfg = config::parse_config(
      "# a comment\n\n[pipeline]\n# another\nepochs_ssl = 9\n", "t");
  CHECK(cfg.pipe.epochs_ssl == 9);
}

TEST_CASE("config file save / load round trip") {
  const auto path = tmp_path("mdmx_io_cfg.ini");
  config::ExperimentConfig cfg;
  cfg.pipe.rounds = 2;
  config::save_config(cfg, path);
  const auto back = config::load_config(path);
  CHECK(back.pipe.rounds == 2);
  std::remove(path.c_str());
}
