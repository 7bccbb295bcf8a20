// Command-line entry point: dataset generation, pipeline and baseline runs,
// selection dumps, and checkpoint evaluation, driven by an INI-style config.
//
// Exit codes: 0 success, 1 config/validation error, 2 runtime abort.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "mdmx/config.hpp"
#include "mdmx/datagen.hpp"
#include "mdmx/eval.hpp"
#include "mdmx/pipeline.hpp"
#include "mdmx/selection.hpp"

namespace fs = std::filesystem;
using namespace mdmx;

namespace {

struct GlobalOpts {
  std::string config_path;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed_override;
  bool quiet = false;
};

std::string workspace_root() {
  const char* ws = std::getenv("MDMX_WORKSPACE");
  return ws ? ws : "";
}

std::string resolve(const std::string& path) {
  if (path.empty() || fs::path(path).is_absolute()) return path;
  const std::string ws = workspace_root();
  return ws.empty() ? path : ws + "/" + path;
}

config::ExperimentConfig load_cfg(const GlobalOpts& g) {
  auto cfg = config::load_config(resolve(g.config_path));
  if (g.seed_override) cfg.pipe.seed = *g.seed_override;
  cfg.noise.seed = cfg.pipe.seed;
  return cfg;
}

pipeline::TrainData train_view(const datagen::NoisyDataset& ds) {
  // training code gets features and given labels only; ground truth stays out
  return {ds.features, ds.given_labels, ds.n_classes};
}

// Ground-truth-aware hooks for the metrics stream.
struct TruthEvaluator : pipeline::Evaluator {
  Matrix test_x;
  std::vector<int> test_y;
  std::optional<std::vector<datagen::GroundTruth>> truth;

  double test_accuracy(const nn::Model& m) override {
    return eval::accuracy(m, test_x, test_y);
  }

  std::optional<double> ood_auroc(const std::vector<double>& scores,
                                  const std::vector<std::size_t>& active) override {
    if (!truth) return std::nullopt;
    std::vector<bool> pos(active.size());
    bool any_pos = false, any_neg = false;
    for (std::size_t p = 0; p < active.size(); ++p) {
      pos[p] = (*truth)[active[p]].kind == datagen::NoiseKind::ood;
      (pos[p] ? any_pos : any_neg) = true;
    }
    if (!any_pos || !any_neg) return std::nullopt;
    return eval::auroc(scores, pos);
  }

  std::optional<eval::PrecisionRecall> split_quality(
      const selection::SplitResult& split,
      const std::vector<std::size_t>& active) override {
    if (!truth) return std::nullopt;
    return eval::selection_prf(split.clean_idx, active, *truth);
  }
};

int cmd_gen(const GlobalOpts& g) {
  const auto cfg = load_cfg(g);
  fs::create_directories(g.out_dir);

  const auto clean = datagen::make_blobs(cfg.data.n_per_class, cfg.data.n_classes,
                                         cfg.data.dim, cfg.data.spread, cfg.pipe.seed);
  auto noisy = datagen::inject_id_noise(clean, cfg.noise.r_in, cfg.noise.id_mode,
                                        cfg.pipe.seed);
  noisy = datagen::inject_ood_noise(noisy, cfg.noise.r_out, cfg.noise.ood_source,
                                    datagen::blob_radius(cfg.data.spread), cfg.pipe.seed);
  datagen::save_dataset(noisy, resolve(cfg.dataset));

  const std::uint64_t test_seed = Rng::substream(cfg.pipe.seed, {0x74657374}).next_u64();
  const auto test_clean = datagen::make_blobs(cfg.data.n_test_per_class, cfg.data.n_classes,
                                              cfg.data.dim, cfg.data.spread, test_seed);
  const auto test = datagen::inject_id_noise(test_clean, 0.0,
                                             datagen::IdNoiseMode::symmetric, test_seed);
  datagen::save_dataset(test, resolve(cfg.test_dataset));

  if (!g.quiet)
    std::cout << "wrote " << resolve(cfg.dataset) << " (" << noisy.features.rows
              << " rows) and " << resolve(cfg.test_dataset) << " ("
              << test.features.rows << " rows)\n";
  return 0;
}

TruthEvaluator make_evaluator(const config::ExperimentConfig& cfg,
                              const datagen::NoisyDataset& train) {
  const auto test = datagen::load_dataset(resolve(cfg.test_dataset), cfg.data.n_classes);
  TruthEvaluator ev;
  ev.test_x = test.features;
  ev.test_y = test.given_labels;
  ev.truth = train.truth;
  return ev;
}

int cmd_run(const GlobalOpts& g, bool baseline) {
  const auto cfg = load_cfg(g);
  fs::create_directories(g.out_dir);
  config::save_config(cfg, g.out_dir + "/config_effective.ini");

  const auto train = datagen::load_dataset(resolve(cfg.dataset), cfg.data.n_classes);
  auto ev = make_evaluator(cfg, train);

  eval::MetricsWriter writer(g.out_dir + "/metrics.jsonl");
  auto sink = [&](const eval::MetricsRecord& r) { writer.write(r); };

  double final_acc;
  if (baseline) {
    const auto model = pipeline::run_baseline(cfg.pipe, train_view(train), ev, sink);
    final_acc = ev.test_accuracy(model);
  } else {
    const auto result =
        pipeline::run_full(cfg.pipe, train_view(train), ev, sink, g.out_dir);
    final_acc = ev.test_accuracy(result.model);
  }
  writer.flush();
  if (!g.quiet)
    std::cout << (baseline ? "baseline" : "pipeline")
              << " final test accuracy: " << final_acc << "\n";
  return 0;
}

int cmd_select(const GlobalOpts& g, const std::string& ckpt_path) {
  const auto cfg = load_cfg(g);
  fs::create_directories(g.out_dir);

  const auto train = datagen::load_dataset(resolve(cfg.dataset), cfg.data.n_classes);
  nn::Model model;
  nn::load_checkpoint(model, resolve(ckpt_path));

  Matrix h;
  model.encode(train.features, h);
  const std::size_t n = train.features.rows;
  std::size_t k = cfg.pipe.knn_k > 0 ? static_cast<std::size_t>(cfg.pipe.knn_k)
                                     : std::min<std::size_t>(100, n / 10);
  k = std::max<std::size_t>(1, std::min(k, n - 1));
  const auto scores = selection::knn_ood_scores(h, k);
  const auto losses = selection::per_sample_losses(model, train.features, train.given_labels);
  const auto fit = selection::fit_gmm_1d(losses);

  const std::string path = g.out_dir + "/selection.csv";
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) {
    std::cerr << "cannot write " << path << "\n";
    return 2;
  }
  std::fprintf(f, "index,ood_score,loss,w,assigned\n");
  for (std::size_t i = 0; i < n; ++i) {
    const double w = selection::clean_posterior(fit, losses[i]);
    std::fprintf(f, "%zu,%.17g,%.17g,%.17g,%s\n", i, scores[i], losses[i], w,
                 w >= cfg.pipe.tau2 ? "clean" : "noisy");
  }
  std::fclose(f);
  if (!g.quiet) std::cout << "wrote " << path << "\n";
  return 0;
}

int cmd_eval(const GlobalOpts& g, const std::string& ckpt_path) {
  const auto cfg = load_cfg(g);
  const auto test = datagen::load_dataset(resolve(cfg.test_dataset), cfg.data.n_classes);
  nn::Model model;
  nn::load_checkpoint(model, resolve(ckpt_path));
  const double acc = eval::accuracy(model, test.features, test.given_labels);
  std::printf("{\"test_acc\":%.17g}\n", acc);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Manifold-mixup noisy-label training pipeline"};
  app.require_subcommand(1);

  GlobalOpts g;
  app.add_option("--config", g.config_path, "experiment config file")->required();
  app.add_option("--out", g.out_dir, "output directory");
  std::uint64_t seed_val = 0;
  auto* seed_opt = app.add_option("--seed", seed_val, "override config seed");
  app.add_flag("--quiet", g.quiet, "suppress progress output");

  auto* gen = app.add_subcommand("gen", "generate train/test datasets");
  auto* run = app.add_subcommand("run", "run the full pipeline");
  auto* baseline = app.add_subcommand("baseline", "run the supervised-CE baseline");
  auto* select = app.add_subcommand("select", "dump OOD scores and clean posteriors");
  auto* evalc = app.add_subcommand("eval", "evaluate a checkpoint on the test set");
  std::string ckpt;
  select->add_option("--checkpoint", ckpt, "model checkpoint")->required();
  evalc->add_option("--checkpoint", ckpt, "model checkpoint")->required();

  CLI11_PARSE(app, argc, argv);
  if (seed_opt->count() > 0) g.seed_override = seed_val;

  try {
    if (gen->parsed()) return cmd_gen(g);
    if (run->parsed()) return cmd_run(g, false);
    if (baseline->parsed()) return cmd_run(g, true);
    if (select->parsed()) return cmd_select(g, ckpt);
    if (evalc->parsed()) return cmd_eval(g, ckpt);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    const std::string msg = e.what();
    std::cerr << "error: " << msg << "\n";
    // config and input-file problems are validation errors
    return msg.rfind("config", 0) == 0 || msg.find("load_dataset") != std::string::npos
               ? 1
               : 2;
  }
  return 1;
}
