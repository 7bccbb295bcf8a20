#pragma once

// Dense-network substrate: encoder f1, projection head g (unit-norm output),
// linear classifier f2, hand-derived gradients, SGD with momentum and a
// cosine learning-rate schedule. Everything is 64-bit and deterministic.

#include <cstdint>
#include <string>
#include <vector>

#include "mdmx/matrix.hpp"
#include "mdmx/rng.hpp"

namespace mdmx::nn {

struct Dense {
  Matrix W;  // out x in
  std::vector<double> b;
  Matrix gW;
  std::vector<double> gb;
  Matrix mW;
  std::vector<double> mb;

  void init(std::size_t in, std::size_t out, Rng& rng);
  void forward(const Matrix& x, Matrix& y) const;  // y = x W^T + b
  // accumulates gW/gb, writes dx = dy * W
  void backward(const Matrix& x, const Matrix& dy, Matrix& dx);
  void zero_grad();
};

struct ModelConfig {
  int input_dim = 2;
  int hidden_dim = 64;
  int embed_dim = 32;   // d_h
  int proj_hidden = 32;
  int proj_dim = 16;    // d_z
  int n_classes = 4;
};

struct EncoderCache {
  Matrix x, a1, h1;  // input, pre-relu, post-relu
};

struct ProjCache {
  Matrix h, a1, h1, v, z;      // input, pre-relu, post-relu, pre-norm, unit
  std::vector<double> norms;   // per-row ||v|| + eps
};

// Handle to one parameter tensor, for the optimizer / checkpoints / tests.
struct TensorRef {
  std::string name;
  std::vector<double>* p;
  std::vector<double>* g;
  std::vector<double>* m;
  bool classifier_group;  // true -> classifier lr, false -> backbone lr
};

struct Model {
  ModelConfig cfg;
  Dense enc1, enc2;    // f1: d -> hidden -> d_h (relu between)
  Dense proj1, proj2;  // g: d_h -> proj_hidden -> d_z, then L2 normalize
  Dense cls;           // f2: d_h -> C

  void init(const ModelConfig& c, std::uint64_t seed);

  void encode(const Matrix& x, Matrix& h, EncoderCache* cache = nullptr) const;
  void project(const Matrix& h, Matrix& z, ProjCache* cache = nullptr) const;
  void classify(const Matrix& h, Matrix& logits) const;

  void encode_backward(const EncoderCache& cache, const Matrix& dh);
  void project_backward(const ProjCache& cache, const Matrix& dz, Matrix& dh);
  void classify_backward(const Matrix& h, const Matrix& dlogits, Matrix& dh);

  void zero_grad();
  std::vector<TensorRef> tensors();
  bool params_finite() const;
};

struct SgdConfig {
  double momentum = 0.9;
  double weight_decay = 5e-4;
  double lr_classifier = 0.1;
  double lr_backbone = 0.001;
  double lr_scale = 1.0;  // single config multiplier over both groups
};

// lr = base * 0.5 * (1 + cos(pi * epoch / total))
double cosine_lr(double base_lr, double epoch, double total_epochs);

// v <- mu v + g + wd p; p <- p - lr(group) * schedule_factor * v.
// Frozen groups are skipped entirely (no momentum or decay update).
// Throws on non-finite gradients, naming the tensor.
void sgd_step(Model& model, const SgdConfig& opt, double schedule_factor,
              bool update_backbone = true, bool update_classifier = true);

// Versioned binary checkpoint: parameters, momentum buffers, rng state.
void save_checkpoint(const Model& model, std::uint64_t rng_state,
                     const std::string& path);
std::uint64_t load_checkpoint(Model& model, const std::string& path);

// relu helpers shared with loss code
void relu(const Matrix& a, Matrix& out);
void relu_backward(const Matrix& a, const Matrix& dout, Matrix& da);

}  // namespace mdmx::nn
