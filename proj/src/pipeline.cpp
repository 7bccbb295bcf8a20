#include "mdmx/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>
#include <stdexcept>

#include "mdmx/contrastive.hpp"
#include "mdmx/rng.hpp"

namespace mdmx::pipeline {

namespace {

constexpr std::uint64_t kShuffleKey = 0x7368666c;  // "shfl"
constexpr std::uint64_t kPlanKey = 0x706c616e;     // "plan"

std::vector<std::size_t> shuffled(std::size_t n, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const std::size_t j = i + rng.below(n - i);
    std::swap(idx[i], idx[j]);
  }
  return idx;
}

Matrix gather_rows(const Matrix& m, const std::vector<std::size_t>& idx) {
  Matrix out(idx.size(), m.cols);
  for (std::size_t i = 0; i < idx.size(); ++i)
    std::copy(m.row(idx[i]), m.row(idx[i]) + m.cols, out.row(i));
  return out;
}

std::size_t default_k(std::size_t n_active, int cfg_k) {
  std::size_t k = cfg_k > 0 ? static_cast<std::size_t>(cfg_k)
                            : std::min<std::size_t>(100, n_active / 10);
  k = std::max<std::size_t>(1, std::min(k, n_active - 1));
  return k;
}

}  // namespace

void pretrain_ssl(nn::Model& model, const TrainData& data,
                  const PipelineConfig& cfg, Evaluator& ev, const MetricsSink& sink) {
  const std::size_t n = data.features.rows;
  const auto fstd = augment::feature_std(data.features);
  std::vector<double> xi(data.features.cols);

  for (int epoch = 0; epoch < cfg.epochs_ssl; ++epoch) {
    Rng order_rng = Rng::substream(cfg.seed, {kShuffleKey, 1, static_cast<std::uint64_t>(epoch)});
    const auto order = shuffled(n, order_rng);
    const double factor = nn::cosine_lr(1.0, epoch, cfg.epochs_ssl);

    double epoch_loss = 0.0;
    std::size_t steps = 0;
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t bsz = std::min<std::size_t>(cfg.batch_size, n - start);
      if (bsz < 2) break;  // a contrastive batch needs at least one pair

      Matrix views(2 * bsz, data.features.cols);
      for (std::size_t b = 0; b < bsz; ++b) {
        const std::size_t s = order[start + b];
        const double* x = data.features.row(s);
        xi.assign(x, x + data.features.cols);
        for (std::uint64_t v = 0; v < 2; ++v) {
          Rng rng = augment::view_rng(cfg.seed, epoch, s, 2 + v);
          const auto aug = augment::strong(xi, cfg.aug, fstd, rng);
          std::copy(aug.begin(), aug.end(), views.row(2 * b + v));
        }
      }

      model.zero_grad();
      nn::EncoderCache ec;
      nn::ProjCache pc;
      Matrix h, z;
      model.encode(views, h, &ec);
      model.project(h, z, &pc);
      const auto res = contrastive::ntxent_loss(z, cfg.ssl_tau);
      if (!std::isfinite(res.loss))
        throw std::runtime_error("pretrain_ssl: contrastive loss diverged");
      Matrix dh;
      model.project_backward(pc, res.grad, dh);
      model.encode_backward(ec, dh);
      nn::sgd_step(model, cfg.opt, factor, /*backbone=*/true, /*classifier=*/false);

      epoch_loss += res.loss;
      ++steps;
    }

    eval::MetricsRecord rec;
    rec.round = -1;
    rec.epoch = epoch;
    rec.l_self = steps ? epoch_loss / static_cast<double>(steps) : 0.0;
    rec.test_acc = ev.test_accuracy(model);
    if (sink) sink(rec);
  }
}

std::vector<double> select_ood(const nn::Model& model, const TrainData& data,
                               const PipelineConfig& cfg, RoundState& state) {
  const std::size_t n = data.features.rows;
  if (state.ood_mask.empty()) state.ood_mask.assign(n, false);
  state.active.clear();
  for (std::size_t i = 0; i < n; ++i)
    if (!state.ood_mask[i]) state.active.push_back(i);

  const double fraction =
      state.round == 0 ? cfg.ood_fraction_initial : cfg.ood_fraction_per_round;

  const Matrix x = gather_rows(data.features, state.active);
  Matrix h;
  model.encode(x, h);
  const auto scores =
      selection::knn_ood_scores(h, default_k(state.active.size(), cfg.knn_k));

  std::size_t masked = n - state.active.size();
  const auto new_mask = selection::ood_mask(scores, fraction);
  std::size_t would_add = 0;
  for (bool b : new_mask) would_add += b ? 1 : 0;
  if (masked + would_add > (9 * n) / 10) {
    std::cerr << "select_ood: mask would exceed 90% of data; not excluding further\n";
  } else {
    for (std::size_t pos = 0; pos < new_mask.size(); ++pos)
      if (new_mask[pos]) state.ood_mask[state.active[pos]] = true;
  }

  const auto scores_out = scores;  // aligned with the pre-update active list
  state.active.clear();
  for (std::size_t i = 0; i < n; ++i)
    if (!state.ood_mask[i]) state.active.push_back(i);
  return scores_out;
}

void refresh_split(const nn::Model& model, const TrainData& data,
                   const PipelineConfig& cfg, RoundState& state) {
  const Matrix x = gather_rows(data.features, state.active);
  std::vector<int> labels(state.active.size());
  for (std::size_t i = 0; i < state.active.size(); ++i)
    labels[i] = data.labels[state.active[i]];

  const auto losses = selection::per_sample_losses(model, x, labels);
  const auto fit = selection::fit_gmm_1d(losses);
  std::vector<double> w(losses.size());
  for (std::size_t i = 0; i < losses.size(); ++i)
    w[i] = selection::clean_posterior(fit, losses[i]);

  state.split = selection::split_clean_noisy(w, cfg.tau2, state.active);

  if (state.split.clean_idx.empty()) {
    // fall back to the lowest-loss 10% as the clean set
    const std::size_t keep = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::ceil(0.1 * losses.size())));
    std::vector<std::size_t> pos(losses.size());
    std::iota(pos.begin(), pos.end(), std::size_t{0});
    std::stable_sort(pos.begin(), pos.end(),
                     [&](std::size_t a, std::size_t b) { return losses[a] < losses[b]; });
    std::vector<bool> clean(losses.size(), false);
    for (std::size_t m = 0; m < keep; ++m) clean[pos[m]] = true;
    state.split.clean_idx.clear();
    state.split.noisy_idx.clear();
    for (std::size_t p = 0; p < losses.size(); ++p)
      (clean[p] ? state.split.clean_idx : state.split.noisy_idx)
          .push_back(state.active[p]);
  }

  state.w_by_index.assign(data.features.rows, 0.0);
  for (std::size_t p = 0; p < state.active.size(); ++p)
    state.w_by_index[state.active[p]] = w[p];
}

void warmup(nn::Model& model, const TrainData& data, const PipelineConfig& cfg,
            const RoundState& state, Evaluator& ev, const MetricsSink& sink) {
  const std::size_t n = state.active.size();
  for (int epoch = 0; epoch < cfg.epochs_warmup; ++epoch) {
    Rng order_rng = Rng::substream(cfg.seed, {kShuffleKey, 2, static_cast<std::uint64_t>(epoch)});
    const auto order = shuffled(n, order_rng);
    const double factor = nn::cosine_lr(1.0, epoch, cfg.epochs_warmup);

    double epoch_loss = 0.0;
    std::size_t steps = 0;
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t bsz = std::min<std::size_t>(cfg.batch_size, n - start);
      std::vector<std::size_t> idx(bsz);
      std::vector<int> labels(bsz);
      for (std::size_t b = 0; b < bsz; ++b) {
        idx[b] = state.active[order[start + b]];
        labels[b] = data.labels[idx[b]];
      }
      const Matrix x = gather_rows(data.features, idx);
      model.zero_grad();
      epoch_loss += losses::supervised_loss(model, x, labels, cfg.loss,
                                            /*use_sce=*/true, /*grads=*/true);
      nn::sgd_step(model, cfg.opt, factor, !cfg.warmup_freeze_backbone, true);
      ++steps;
    }

    eval::MetricsRecord rec;
    rec.round = 0;
    rec.epoch = epoch;
    rec.l_sup = steps ? epoch_loss / static_cast<double>(steps) : 0.0;
    rec.test_acc = ev.test_accuracy(model);
    if (sink) sink(rec);
  }
}

SemiEpochResult semi_epoch(nn::Model& model, const TrainData& data,
                           const PipelineConfig& cfg, const RoundState& state,
                           int semi_epoch_index, int total_semi_epochs) {
  const auto& clean = state.split.clean_idx;
  const auto& noisy = state.split.noisy_idx;
  if (clean.empty()) throw std::runtime_error("semi_epoch: empty clean set");
  const std::size_t dim = data.features.cols;
  const std::size_t c = model.cfg.n_classes;
  const auto fstd = augment::feature_std(data.features);

  // view epochs are keyed globally so each epoch draws fresh augmentations
  const std::uint64_t view_epoch = 0x73656d00ULL + static_cast<std::uint64_t>(semi_epoch_index);

  Rng order_x = Rng::substream(cfg.seed, {kShuffleKey, 3, view_epoch});
  Rng order_u = Rng::substream(cfg.seed, {kShuffleKey, 4, view_epoch});
  const auto perm_x = shuffled(clean.size(), order_x);
  const auto perm_u = noisy.empty() ? std::vector<std::size_t>{} : shuffled(noisy.size(), order_u);

  const std::size_t bs = cfg.batch_size;
  const std::size_t steps = std::max<std::size_t>(
      (clean.size() + bs - 1) / bs, noisy.empty() ? 0 : (noisy.size() + bs - 1) / bs);
  const double factor = nn::cosine_lr(1.0, semi_epoch_index, total_semi_epochs);

  std::vector<double> xi(dim);
  SemiEpochResult out;

  for (std::size_t step = 0; step < steps; ++step) {
    // labeled and unlabeled slices, cycling the shorter
    std::vector<std::size_t> bx, bu;
    for (std::size_t b = 0; b < std::min(bs, clean.size()); ++b)
      bx.push_back(clean[perm_x[(step * bs + b) % clean.size()]]);
    if (!noisy.empty())
      for (std::size_t b = 0; b < std::min(bs, noisy.size()); ++b)
        bu.push_back(noisy[perm_u[(step * bs + b) % noisy.size()]]);

    const std::size_t nx = bx.size();
    const std::size_t nu = bu.size();

    Matrix weak1(nx + nu, dim), weak2(nx + nu, dim);
    Matrix pool(2 * (nx + nu), dim);
    auto fill_views = [&](const std::vector<std::size_t>& idx, std::size_t row0) {
      for (std::size_t b = 0; b < idx.size(); ++b) {
        const double* x = data.features.row(idx[b]);
        xi.assign(x, x + dim);
        const auto views =
            augment::four_views(xi, cfg.aug, fstd, cfg.seed, view_epoch, idx[b]);
        std::copy(views[0].begin(), views[0].end(), weak1.row(row0 + b));
        std::copy(views[1].begin(), views[1].end(), weak2.row(row0 + b));
        std::copy(views[2].begin(), views[2].end(), pool.row(2 * (row0 + b)));
        std::copy(views[3].begin(), views[3].end(), pool.row(2 * (row0 + b) + 1));
      }
    };
    fill_views(bx, 0);
    fill_views(bu, nx);

    // weak-view predictions, no gradients recorded
    Matrix h1, h2, logits1, logits2;
    model.encode(weak1, h1);
    model.classify(h1, logits1);
    model.encode(weak2, h2);
    model.classify(h2, logits2);

    // labeled targets: refine with w; unlabeled: sharpened guesses
    Matrix pool_targets(2 * (nx + nu), c);
    std::vector<double> p1(c), p2(c), mean_pred(c);
    for (std::size_t b = 0; b < nx; ++b) {
      losses::softmax_row(logits1.row(b), c, p1.data());
      losses::softmax_row(logits2.row(b), c, p2.data());
      for (std::size_t j = 0; j < c; ++j) mean_pred[j] = 0.5 * (p1[j] + p2[j]);
      const auto t = mixematch::refine_label(data.labels[bx[b]], c,
                                             state.w_by_index[bx[b]], mean_pred);
      std::copy(t.begin(), t.end(), pool_targets.row(2 * b));
      std::copy(t.begin(), t.end(), pool_targets.row(2 * b + 1));
    }
    if (nu > 0) {
      Matrix wu1(nu, c), wu2(nu, c);
      for (std::size_t b = 0; b < nu; ++b) {
        std::copy(logits1.row(nx + b), logits1.row(nx + b) + c, wu1.row(b));
        std::copy(logits2.row(nx + b), logits2.row(nx + b) + c, wu2.row(b));
      }
      const Matrix q = mixematch::guess_labels(wu1, wu2, cfg.mix.T);
      for (std::size_t b = 0; b < nu; ++b) {
        std::copy(q.row(b), q.row(b) + c, pool_targets.row(2 * (nx + b)));
        std::copy(q.row(b), q.row(b) + c, pool_targets.row(2 * (nx + b) + 1));
      }
    }

    Rng plan_rng = Rng::substream(cfg.seed, {kPlanKey, view_epoch, step});
    losses::SemiBatch batch;
    batch.plan = mixematch::draw_plan(2 * nx, 2 * nu, cfg.mix.alpha, plan_rng);
    batch.pool_inputs = std::move(pool);
    batch.mixed_inputs = mixematch::apply_mix(batch.pool_inputs, batch.plan);
    batch.mixed_targets = mixematch::apply_mix(pool_targets, batch.plan);
    batch.ntxent_tau = cfg.ssl_tau;

    model.zero_grad();
    const auto res = losses::semi_loss(model, batch, cfg.loss,
                                       semi_epoch_index, /*grads=*/true);
    if (!std::isfinite(res.total))
      throw std::runtime_error("semi_epoch: loss diverged");
    nn::sgd_step(model, cfg.opt, factor);

    out.l_sup += res.l_sup;
    out.l_unsup += res.l_unsup;
    out.l_self += res.l_self;
  }

  if (steps > 0) {
    out.l_sup /= static_cast<double>(steps);
    out.l_unsup /= static_cast<double>(steps);
    out.l_self /= static_cast<double>(steps);
  }
  return out;
}

RunResult run_full(const PipelineConfig& cfg, const TrainData& data,
                   Evaluator& ev, const MetricsSink& sink,
                   const std::string& out_dir) {
  PipelineConfig c = cfg;
  c.model.input_dim = static_cast<int>(data.features.cols);
  c.model.n_classes = data.n_classes;

  RunResult result;
  result.model.init(c.model, c.seed);

  pretrain_ssl(result.model, data, c, ev, sink);

  RoundState state;
  state.ood_mask.assign(data.features.rows, false);
  const int total_semi = c.rounds * c.epochs_semi;
  int semi_counter = 0;
  int sup_epoch = c.epochs_warmup;  // warmup emits epochs [0, epochs_warmup)

  for (int round = 0; round < c.rounds; ++round) {
    state.round = round;
    const auto active_before = [&] {
      std::vector<std::size_t> a;
      for (std::size_t i = 0; i < state.ood_mask.size(); ++i)
        if (!state.ood_mask[i]) a.push_back(i);
      return a;
    }();
    const auto scores = select_ood(result.model, data, c, state);
    const auto pending_auroc = ev.ood_auroc(scores, active_before);

    if (round == 0) warmup(result.model, data, c, state, ev, sink);

    refresh_split(result.model, data, c, state);
    auto pending_prf = ev.split_quality(state.split, state.active);

    for (int e = 0; e < c.epochs_semi; ++e) {
      if (e > 0 && c.refresh_every > 0 && e % c.refresh_every == 0)
        refresh_split(result.model, data, c, state);
      const auto res =
          semi_epoch(result.model, data, c, state, semi_counter, total_semi);
      ++semi_counter;

      eval::MetricsRecord rec;
      rec.round = round;
      rec.epoch = sup_epoch++;
      rec.l_sup = res.l_sup;
      rec.l_unsup = res.l_unsup;
      rec.l_self = res.l_self;
      rec.test_acc = ev.test_accuracy(result.model);
      if (e == 0) {
        rec.ood_auroc = pending_auroc;
        if (pending_prf) {
          rec.sel_p = pending_prf->precision;
          rec.sel_r = pending_prf->recall;
        }
      }
      if (sink) sink(rec);
    }

    if (!out_dir.empty())
      nn::save_checkpoint(result.model, c.seed,
                          out_dir + "/round_" + std::to_string(round) + ".ckpt");
  }

  if (c.rounds == 0) {
    eval::MetricsRecord rec;
    rec.round = 0;
    rec.epoch = 0;
    rec.test_acc = ev.test_accuracy(result.model);
    if (sink) sink(rec);
  }

  result.final_state = std::move(state);
  return result;
}

nn::Model run_baseline(const PipelineConfig& cfg, const TrainData& data,
                       Evaluator& ev, const MetricsSink& sink) {
  PipelineConfig c = cfg;
  c.model.input_dim = static_cast<int>(data.features.cols);
  c.model.n_classes = data.n_classes;

  nn::Model model;
  model.init(c.model, c.seed);

  const int total = c.epochs_ssl + c.epochs_warmup + c.rounds * c.epochs_semi;
  const std::size_t n = data.features.rows;

  for (int epoch = 0; epoch < total; ++epoch) {
    Rng order_rng = Rng::substream(c.seed, {kShuffleKey, 5, static_cast<std::uint64_t>(epoch)});
    const auto order = shuffled(n, order_rng);
    const double factor = nn::cosine_lr(1.0, epoch, total);

    double epoch_loss = 0.0;
    std::size_t steps = 0;
    for (std::size_t start = 0; start < n; start += c.batch_size) {
      const std::size_t bsz = std::min<std::size_t>(c.batch_size, n - start);
      std::vector<std::size_t> idx(order.begin() + start, order.begin() + start + bsz);
      std::vector<int> labels(bsz);
      for (std::size_t b = 0; b < bsz; ++b) labels[b] = data.labels[idx[b]];
      const Matrix x = gather_rows(data.features, idx);
      model.zero_grad();
      epoch_loss += losses::supervised_loss(model, x, labels, c.loss,
                                            /*use_sce=*/false, /*grads=*/true);
      nn::sgd_step(model, c.opt, factor);
      ++steps;
    }

    eval::MetricsRecord rec;
    rec.round = 0;
    rec.epoch = epoch;
    rec.l_sup = steps ? epoch_loss / static_cast<double>(steps) : 0.0;
    rec.test_acc = ev.test_accuracy(model);
    if (sink) sink(rec);
  }
  return model;
}

}  // namespace mdmx::pipeline
