#pragma once

// Three-step training pipeline: (1) contrastive pretraining, (2) KNN OOD
// filtering + warmup, (3) semi-supervised MixEMatch training, with steps 2-3
// iterated over rounds. Training code only ever sees TrainData (features and
// given labels); ground truth stays behind the Evaluator interface.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mdmx/augment.hpp"
#include "mdmx/eval.hpp"
#include "mdmx/losses.hpp"
#include "mdmx/mixematch.hpp"
#include "mdmx/nn.hpp"
#include "mdmx/selection.hpp"

namespace mdmx::pipeline {

struct TrainData {
  Matrix features;
  std::vector<int> labels;
  int n_classes = 0;
};

struct PipelineConfig {
  int epochs_ssl = 200;
  int epochs_warmup = 20;
  int epochs_semi = 100;  // per round
  int rounds = 3;
  int refresh_every = 5;  // GMM split refresh cadence within a round
  double ood_fraction_initial = 0.1;
  double ood_fraction_per_round = 0.05;
  double tau2 = 0.3;
  int knn_k = 0;  // 0 -> min(100, N/10)
  int batch_size = 128;
  double ssl_tau = 0.5;
  bool warmup_freeze_backbone = false;
  mixematch::MixParams mix;
  losses::LossWeights loss;
  augment::AugmentSpec aug;
  nn::SgdConfig opt;
  nn::ModelConfig model;  // input_dim / n_classes filled from data
  std::uint64_t seed = 0;
};

// Ground-truth-aware measurements live behind this interface; the default
// implementations report nothing.
struct Evaluator {
  virtual ~Evaluator() = default;
  virtual double test_accuracy(const nn::Model&) { return 0.0; }
  virtual std::optional<double> ood_auroc(const std::vector<double>& /*scores*/,
                                          const std::vector<std::size_t>& /*active*/) {
    return std::nullopt;
  }
  virtual std::optional<eval::PrecisionRecall> split_quality(
      const selection::SplitResult&, const std::vector<std::size_t>& /*active*/) {
    return std::nullopt;
  }
};

using MetricsSink = std::function<void(const eval::MetricsRecord&)>;

struct RoundState {
  int round = -1;
  std::vector<bool> ood_mask;         // monotone non-shrinking across rounds
  std::vector<std::size_t> active;    // indices not OOD-masked
  selection::SplitResult split;       // over active
  std::vector<double> w_by_index;     // clean probability per global index
};

// Step 1: encoder + projection head on NT-Xent over two strong views.
// Classifier untouched.
void pretrain_ssl(nn::Model& model, const TrainData& data,
                  const PipelineConfig& cfg, Evaluator& ev, const MetricsSink& sink);

// KNN scoring over current embeddings of active samples; extends the mask by
// the round's fraction. Returns the scores (aligned with state.active before
// the update) for metric hooks.
std::vector<double> select_ood(const nn::Model& model, const TrainData& data,
                               const PipelineConfig& cfg, RoundState& state);

// SCE warmup on active samples.
void warmup(nn::Model& model, const TrainData& data, const PipelineConfig& cfg,
            const RoundState& state, Evaluator& ev, const MetricsSink& sink);

// Per-sample loss -> GMM -> Eq.-style threshold split; lowest-loss 10%
// fallback when the clean set comes out empty.
void refresh_split(const nn::Model& model, const TrainData& data,
                   const PipelineConfig& cfg, RoundState& state);

struct SemiEpochResult {
  double l_sup = 0.0;
  double l_unsup = 0.0;
  double l_self = 0.0;
};

// One MixEMatch epoch; `semi_epoch_index` is the global semi epoch counter
// (drives the lambda_u ramp and cosine schedule).
SemiEpochResult semi_epoch(nn::Model& model, const TrainData& data,
                           const PipelineConfig& cfg, const RoundState& state,
                           int semi_epoch_index, int total_semi_epochs);

struct RunResult {
  nn::Model model;
  RoundState final_state;
};

// Full pipeline; checkpoints round_<i>.ckpt under out_dir when non-empty.
RunResult run_full(const PipelineConfig& cfg, const TrainData& data,
                   Evaluator& ev, const MetricsSink& sink,
                   const std::string& out_dir = "");

// Supervised cross-entropy baseline under the same total epoch budget.
nn::Model run_baseline(const PipelineConfig& cfg, const TrainData& data,
                       Evaluator& ev, const MetricsSink& sink);

}  // namespace mdmx::pipeline
