#pragma once

// Weak/strong stochastic augmentations for vector data and the four views
// per sample used by the semi-supervised step. Jitter scales are fractions
// of the per-feature std of the training set. Each (sample, view, epoch)
// gets its own RNG substream so shuffling order never changes a view.

#include <array>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "mdmx/matrix.hpp"
#include "mdmx/rng.hpp"

namespace mdmx::augment {

struct AugmentSpec {
  double weak_jitter_sigma = 0.05;
  double strong_jitter_sigma = 0.25;
  double strong_dropout_p = 0.2;
  double strong_scale_lo = 0.8;
  double strong_scale_hi = 1.25;

  void validate() const {
    if (weak_jitter_sigma < 0.0 || strong_jitter_sigma < 0.0)
      throw std::invalid_argument("AugmentSpec: jitter sigmas must be >= 0");
    if (strong_dropout_p < 0.0 || strong_dropout_p >= 1.0)
      throw std::invalid_argument("AugmentSpec: dropout_p must be in [0,1)");
    if (!(strong_scale_lo <= 1.0 && 1.0 <= strong_scale_hi))
      throw std::invalid_argument("AugmentSpec: scale range must bracket 1");
  }
};

// per-feature std of a dataset, used to scale jitter
inline std::vector<double> feature_std(const Matrix& x) {
  std::vector<double> mean(x.cols, 0.0), var(x.cols, 0.0);
  for (std::size_t i = 0; i < x.rows; ++i)
    for (std::size_t j = 0; j < x.cols; ++j) mean[j] += x.at(i, j);
  for (double& m : mean) m /= static_cast<double>(x.rows);
  for (std::size_t i = 0; i < x.rows; ++i)
    for (std::size_t j = 0; j < x.cols; ++j) {
      const double d = x.at(i, j) - mean[j];
      var[j] += d * d;
    }
  std::vector<double> out(x.cols);
  for (std::size_t j = 0; j < x.cols; ++j)
    out[j] = std::sqrt(var[j] / static_cast<double>(x.rows));
  return out;
}

inline std::vector<double> weak(const std::vector<double>& x, const AugmentSpec& spec,
                                const std::vector<double>& fstd, Rng& rng) {
  std::vector<double> out = x;
  for (std::size_t j = 0; j < out.size(); ++j)
    out[j] += spec.weak_jitter_sigma * fstd[j] * rng.normal();
  return out;
}

inline std::vector<double> strong(const std::vector<double>& x, const AugmentSpec& spec,
                                  const std::vector<double>& fstd, Rng& rng) {
  std::vector<double> out = x;
  for (std::size_t j = 0; j < out.size(); ++j)
    out[j] += spec.strong_jitter_sigma * fstd[j] * rng.normal();
  for (std::size_t j = 0; j < out.size(); ++j)
    if (rng.uniform() < spec.strong_dropout_p) out[j] = 0.0;
  const double s = rng.uniform(spec.strong_scale_lo, spec.strong_scale_hi);
  for (double& v : out) v *= s;
  return out;
}

// RNG for a single view; key is (epoch, sample, view)
inline Rng view_rng(std::uint64_t seed, std::uint64_t epoch, std::uint64_t sample,
                    std::uint64_t view) {
  return Rng::substream(seed, {0x61756700, epoch, sample, view});
}

// views 0,1 weak; views 2,3 strong
inline std::array<std::vector<double>, 4> four_views(
    const std::vector<double>& x, const AugmentSpec& spec,
    const std::vector<double>& fstd, std::uint64_t seed, std::uint64_t epoch,
    std::uint64_t sample) {
  std::array<std::vector<double>, 4> out;
  for (std::uint64_t v = 0; v < 4; ++v) {
    Rng rng = view_rng(seed, epoch, sample, v);
    out[v] = v < 2 ? weak(x, spec, fstd, rng) : strong(x, spec, fstd, rng);
  }
  return out;
}

}  // namespace mdmx::augment
