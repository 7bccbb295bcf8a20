#pragma once

// Synthetic blob datasets with controlled ID and OOD label noise. Ground
// truth travels in a sidecar structure that only the evaluation code reads.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mdmx/matrix.hpp"

namespace mdmx::datagen {

enum class NoiseKind { clean, id_noise, ood };

struct GroundTruth {
  int true_label = -1;  // -1 = none (OOD)
  NoiseKind kind = NoiseKind::clean;
};

struct CleanDataset {
  Matrix features;  // N x d
  std::vector<int> labels;
  int n_classes = 0;
  int dim = 0;
};

struct NoisyDataset {
  Matrix features;  // N x d
  std::vector<int> given_labels;
  int n_classes = 0;
  int dim = 0;
  std::optional<std::vector<GroundTruth>> truth;
};

enum class IdNoiseMode { symmetric, asymmetric };
enum class OodSource { uniform_ring, shifted_blobs };

struct NoiseSpec {
  double r_in = 0.0;
  double r_out = 0.0;
  IdNoiseMode id_mode = IdNoiseMode::symmetric;
  OodSource ood_source = OodSource::uniform_ring;
  std::uint64_t seed = 0;
};

// Arrangement radius used by make_blobs for a given spread.
inline double blob_radius(double spread) { return 4.0 * spread; }

// Class c centered on a radius-4*spread circle (first two dims), isotropic
// Gaussian of scale `spread` around it. Deterministic per seed.
CleanDataset make_blobs(std::size_t n_per_class, int n_classes, int dim,
                        double spread, std::uint64_t seed);

// Flip round(r_in * N) labels chosen uniformly without replacement.
// symmetric: uniform over the other C-1 classes; asymmetric: c -> c+1 mod C.
NoisyDataset inject_id_noise(const CleanDataset& ds, double r_in,
                             IdNoiseMode mode, std::uint64_t seed);

// Replace round(r_out * N) feature rows (never id_noise rows) with draws from
// the OOD source. `radius` is the blob arrangement radius R; uniform_ring
// draws have norm in [2R, 3R], shifted_blobs are the class arrangement
// translated far outside it. Given labels are kept.
NoisyDataset inject_ood_noise(const NoisyDataset& ds, double r_out,
                              OodSource source, double radius,
                              std::uint64_t seed);

// CSV with header feat_0,...,feat_{d-1},label; 17-significant-digit floats.
// Ground truth goes to <path minus .csv>.truth.csv when present.
void save_dataset(const NoisyDataset& ds, const std::string& path);

// Missing truth sidecar is not an error; truth just stays empty. Pass
// expected_classes >= 0 to validate labels against a known class count.
NoisyDataset load_dataset(const std::string& path, int expected_classes = -1);

// round-half-up, used for all noise counts
inline std::size_t round_count(double x) {
  return static_cast<std::size_t>(std::floor(x + 0.5));
}

}  // namespace mdmx::datagen
