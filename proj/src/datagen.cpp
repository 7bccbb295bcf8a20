#include "mdmx/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "mdmx/rng.hpp"

namespace mdmx::datagen {

namespace {

// first k entries of a seeded uniform permutation of [0, n)
std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k,
                                                    Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < k && i + 1 < n; ++i) {
    const std::size_t j = i + rng.below(n - i);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(std::min(k, n));
  return idx;
}

void class_center(int c, int n_classes, int dim, double radius, double* out) {
  const double theta = 2.0 * M_PI * static_cast<double>(c) / n_classes;
  std::fill(out, out + dim, 0.0);
  out[0] = radius * std::cos(theta);
  out[1] = radius * std::sin(theta);
}

}  // namespace

CleanDataset make_blobs(std::size_t n_per_class, int n_classes, int dim,
                        double spread, std::uint64_t seed) {
  if (n_per_class < 1 || n_classes < 2 || dim < 2)
    throw std::invalid_argument("make_blobs: need n_per_class>=1, n_classes>=2, dim>=2");
  if (!(spread > 0.0) || !std::isfinite(spread))
    throw std::invalid_argument("make_blobs: spread must be finite and > 0");

  const double radius = blob_radius(spread);
  CleanDataset ds;
  ds.n_classes = n_classes;
  ds.dim = dim;
  ds.features = Matrix(n_per_class * n_classes, dim);
  ds.labels.resize(ds.features.rows);

  Rng rng = Rng::substream(seed, {0x626c6f62});  // "blob"
  std::vector<double> center(dim);
  std::size_t row = 0;
  for (int c = 0; c < n_classes; ++c) {
    class_center(c, n_classes, dim, radius, center.data());
    for (std::size_t i = 0; i < n_per_class; ++i, ++row) {
      double* f = ds.features.row(row);
      for (int j = 0; j < dim; ++j) f[j] = center[j] + spread * rng.normal();
      ds.labels[row] = c;
    }
  }
  return ds;
}

NoisyDataset inject_id_noise(const CleanDataset& ds, double r_in,
                             IdNoiseMode mode, std::uint64_t seed) {
  if (r_in < 0.0 || r_in > 1.0)
    throw std::invalid_argument("inject_id_noise: r_in must be in [0,1]");

  const std::size_t n = ds.features.rows;
  NoisyDataset out;
  out.features = ds.features;
  out.given_labels = ds.labels;
  out.n_classes = ds.n_classes;
  out.dim = ds.dim;
  out.truth.emplace(n);
  for (std::size_t i = 0; i < n; ++i) {
    (*out.truth)[i] = {ds.labels[i], NoiseKind::clean};
  }

  Rng rng = Rng::substream(seed, {0x69645f6e});  // "id_n"
  const std::size_t k = round_count(r_in * static_cast<double>(n));
  for (std::size_t i : sample_without_replacement(n, k, rng)) {
    const int c = ds.labels[i];
    int flipped;
    if (mode == IdNoiseMode::symmetric) {
      // uniform over the other C-1 classes
      flipped = static_cast<int>(rng.below(ds.n_classes - 1));
      if (flipped >= c) ++flipped;
    } else {
      flipped = (c + 1) % ds.n_classes;
    }
    out.given_labels[i] = flipped;
    (*out.truth)[i].kind = NoiseKind::id_noise;
  }
  return out;
}

NoisyDataset inject_ood_noise(const NoisyDataset& ds, double r_out,
                              OodSource source, double radius,
                              std::uint64_t seed) {
  if (r_out < 0.0 || r_out > 1.0)
    throw std::invalid_argument("inject_ood_noise: r_out must be in [0,1]");
  if (!ds.truth) throw std::invalid_argument("inject_ood_noise: dataset lacks ground truth");

  const std::size_t n = ds.features.rows;
  const std::size_t k = round_count(r_out * static_cast<double>(n));

  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < n; ++i)
    if ((*ds.truth)[i].kind != NoiseKind::id_noise) candidates.push_back(i);
  if (k > candidates.size())
    throw std::invalid_argument("inject_ood_noise: not enough non-id-noise samples");

  NoisyDataset out = ds;
  Rng rng = Rng::substream(seed, {0x6f6f645f});  // "ood_"
  const auto pick = sample_without_replacement(candidates.size(), k, rng);
  const int dim = ds.dim;
  const double spread = radius / 4.0;
  std::vector<double> center(dim);
  for (std::size_t p : pick) {
    const std::size_t i = candidates[p];
    double* f = out.features.row(i);
    if (source == OodSource::uniform_ring) {
      // uniform direction, radius uniform in [2R, 3R]
      double norm2 = 0.0;
      for (int j = 0; j < dim; ++j) {
        f[j] = rng.normal();
        norm2 += f[j] * f[j];
      }
      const double r = rng.uniform(2.0 * radius, 3.0 * radius);
      const double s = r / std::sqrt(norm2 + 1e-300);
      for (int j = 0; j < dim; ++j) f[j] *= s;
    } else {
      // class arrangement translated well outside the original blobs
      const int c = static_cast<int>(rng.below(ds.n_classes));
      class_center(c, ds.n_classes, dim, radius, center.data());
      center[0] += 6.0 * radius;
      center[1] += 6.0 * radius;
      for (int j = 0; j < dim; ++j) f[j] = center[j] + spread * rng.normal();
    }
    (*out.truth)[i].kind = NoiseKind::ood;
    (*out.truth)[i].true_label = -1;
  }
  return out;
}

}  // namespace mdmx::datagen
