#include "mdmx/nn.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace mdmx::nn {

void Dense::init(std::size_t in, std::size_t out, Rng& rng) {
  W = Matrix(out, in);
  b.assign(out, 0.0);
  const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
  for (double& w : W.data) w = rng.uniform(-limit, limit);
  // biases too: an all-zero bias maps a fully dropped-out input to an exactly
  // zero projection vector, which the contrastive loss cannot normalize
  for (double& v : b) v = rng.uniform(-limit, limit);
  gW = Matrix(out, in);
  gb.assign(out, 0.0);
  mW = Matrix(out, in);
  mb.assign(out, 0.0);
}

void Dense::forward(const Matrix& x, Matrix& y) const {
  if (x.cols != W.cols)
    throw std::invalid_argument("Dense::forward: input dim " + std::to_string(x.cols) +
                                " != " + std::to_string(W.cols));
  gemm_nt(x, W, y);
  for (std::size_t i = 0; i < y.rows; ++i) {
    double* row = y.row(i);
    for (std::size_t j = 0; j < y.cols; ++j) row[j] += b[j];
  }
}

void Dense::backward(const Matrix& x, const Matrix& dy, Matrix& dx) {
  gemm_tn_acc(dy, x, gW);  // gW += dy^T x
  for (std::size_t i = 0; i < dy.rows; ++i)
    for (std::size_t j = 0; j < dy.cols; ++j) gb[j] += dy.at(i, j);
  gemm_nn(dy, W, dx);  // dx = dy W
}

void Dense::zero_grad() {
  gW.zero();
  std::fill(gb.begin(), gb.end(), 0.0);
}

void relu(const Matrix& a, Matrix& out) {
  out = a;
  for (double& v : out.data) v = v > 0.0 ? v : 0.0;
}

void relu_backward(const Matrix& a, const Matrix& dout, Matrix& da) {
  da = dout;
  for (std::size_t i = 0; i < a.data.size(); ++i)
    if (a.data[i] <= 0.0) da.data[i] = 0.0;
}

void Model::init(const ModelConfig& c, std::uint64_t seed) {
  cfg = c;
  Rng rng = Rng::substream(seed, {0x696e6974});  // "init"
  enc1.init(c.input_dim, c.hidden_dim, rng);
  enc2.init(c.hidden_dim, c.embed_dim, rng);
  proj1.init(c.embed_dim, c.proj_hidden, rng);
  proj2.init(c.proj_hidden, c.proj_dim, rng);
  cls.init(c.embed_dim, c.n_classes, rng);
}

void Model::encode(const Matrix& x, Matrix& h, EncoderCache* cache) const {
  Matrix a1, h1;
  enc1.forward(x, a1);
  relu(a1, h1);
  enc2.forward(h1, h);
  if (cache) {
    cache->x = x;
    cache->a1 = std::move(a1);
    cache->h1 = std::move(h1);
  }
}

void Model::project(const Matrix& h, Matrix& z, ProjCache* cache) const {
  Matrix a1, h1, v;
  proj1.forward(h, a1);
  relu(a1, h1);
  proj2.forward(h1, v);
  z = v;
  std::vector<double> norms(v.rows);
  for (std::size_t i = 0; i < v.rows; ++i) {
    const double n = std::sqrt(kernels::dot(v.row(i), v.row(i), v.cols)) + 1e-12;
    norms[i] = n;
    kernels::scale(1.0 / n, z.row(i), z.cols);
  }
  if (cache) {
    cache->h = h;
    cache->a1 = std::move(a1);
    cache->h1 = std::move(h1);
    cache->v = std::move(v);
    cache->z = z;
    cache->norms = std::move(norms);
  }
}

void Model::classify(const Matrix& h, Matrix& logits) const {
  cls.forward(h, logits);
}

void Model::encode_backward(const EncoderCache& cache, const Matrix& dh) {
  Matrix dh1, da1, dx;
  enc2.backward(cache.h1, dh, dh1);
  relu_backward(cache.a1, dh1, da1);
  enc1.backward(cache.x, da1, dx);
}

void Model::project_backward(const ProjCache& cache, const Matrix& dz, Matrix& dh) {
  // through the normalization: dv = (dz - z (z . dz)) / ||v||
  Matrix dv(dz.rows, dz.cols);
  for (std::size_t i = 0; i < dz.rows; ++i) {
    const double* z = cache.z.row(i);
    const double* g = dz.row(i);
    const double zg = kernels::dot(z, g, dz.cols);
    double* out = dv.row(i);
    for (std::size_t j = 0; j < dz.cols; ++j) out[j] = (g[j] - z[j] * zg) / cache.norms[i];
  }
  Matrix dh1, da1;
  proj2.backward(cache.h1, dv, dh1);
  relu_backward(cache.a1, dh1, da1);
  proj1.backward(cache.h, da1, dh);
}

void Model::classify_backward(const Matrix& h, const Matrix& dlogits, Matrix& dh) {
  cls.backward(h, dlogits, dh);
}

void Model::zero_grad() {
  enc1.zero_grad();
  enc2.zero_grad();
  proj1.zero_grad();
  proj2.zero_grad();
  cls.zero_grad();
}

std::vector<TensorRef> Model::tensors() {
  auto refs = [](const char* name, Dense& d, bool is_cls) {
    return std::vector<TensorRef>{
        {std::string(name) + ".W", &d.W.data, &d.gW.data, &d.mW.data, is_cls},
        {std::string(name) + ".b", &d.b, &d.gb, &d.mb, is_cls}};
  };
  std::vector<TensorRef> out;
  for (auto& grp : {refs("enc1", enc1, false), refs("enc2", enc2, false),
                    refs("proj1", proj1, false), refs("proj2", proj2, false),
                    refs("cls", cls, true)})
    out.insert(out.end(), grp.begin(), grp.end());
  return out;
}

bool Model::params_finite() const {
  for (const Dense* d : {&enc1, &enc2, &proj1, &proj2, &cls}) {
    if (!d->W.finite()) return false;
    for (double v : d->b)
      if (!std::isfinite(v)) return false;
  }
  return true;
}

double cosine_lr(double base_lr, double epoch, double total_epochs) {
  if (total_epochs <= 0.0) return base_lr;
  return base_lr * 0.5 * (1.0 + std::cos(M_PI * epoch / total_epochs));
}

void sgd_step(Model& model, const SgdConfig& opt, double schedule_factor,
              bool update_backbone, bool update_classifier) {
  for (TensorRef t : model.tensors()) {
    if (t.classifier_group ? !update_classifier : !update_backbone) continue;
    const double lr = (t.classifier_group ? opt.lr_classifier : opt.lr_backbone) *
                      opt.lr_scale * schedule_factor;
    for (std::size_t i = 0; i < t.p->size(); ++i) {
      const double g = (*t.g)[i];
      if (!std::isfinite(g))
        throw std::runtime_error("sgd_step: non-finite gradient in " + t.name);
      double& v = (*t.m)[i];
      v = opt.momentum * v + g + opt.weight_decay * (*t.p)[i];
      (*t.p)[i] -= lr * v;
    }
  }
  if (!model.params_finite())
    throw std::runtime_error("sgd_step: parameters became non-finite");
}

namespace {

constexpr char kMagic[] = "MDMX-CKPT-1\n";

void write_u64(std::ofstream& f, std::uint64_t v) {
  f.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint64_t read_u64(std::ifstream& f) {
  std::uint64_t v = 0;
  f.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}

}  // namespace

void save_checkpoint(const Model& model, std::uint64_t rng_state,
                     const std::string& path) {
  // write-temp-then-rename so readers never see a partial file
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary);
    if (!f) throw std::runtime_error("save_checkpoint: cannot write " + tmp);
    f.write(kMagic, sizeof(kMagic) - 1);
    const ModelConfig& c = model.cfg;
    for (int v : {c.input_dim, c.hidden_dim, c.embed_dim, c.proj_hidden, c.proj_dim, c.n_classes})
      write_u64(f, static_cast<std::uint64_t>(v));
    write_u64(f, rng_state);
    auto& m = const_cast<Model&>(model);
    for (TensorRef t : m.tensors()) {
      write_u64(f, t.p->size());
      f.write(reinterpret_cast<const char*>(t.p->data()), t.p->size() * sizeof(double));
      f.write(reinterpret_cast<const char*>(t.m->data()), t.m->size() * sizeof(double));
    }
    if (!f) throw std::runtime_error("save_checkpoint: write failed for " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw std::runtime_error("save_checkpoint: rename to " + path + " failed");
}

std::uint64_t load_checkpoint(Model& model, const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("load_checkpoint: cannot open " + path);
  char magic[sizeof(kMagic) - 1];
  f.read(magic, sizeof(magic));
  if (!f || std::string(magic, sizeof(magic)) != std::string(kMagic, sizeof(magic)))
    throw std::runtime_error("load_checkpoint: bad header in " + path);
  ModelConfig c;
  c.input_dim = static_cast<int>(read_u64(f));
  c.hidden_dim = static_cast<int>(read_u64(f));
  c.embed_dim = static_cast<int>(read_u64(f));
  c.proj_hidden = static_cast<int>(read_u64(f));
  c.proj_dim = static_cast<int>(read_u64(f));
  c.n_classes = static_cast<int>(read_u64(f));
  const std::uint64_t rng_state = read_u64(f);
  model.init(c, 0);
  for (TensorRef t : model.tensors()) {
    const std::uint64_t n = read_u64(f);
    if (n != t.p->size())
      throw std::runtime_error("load_checkpoint: shape mismatch in " + t.name);
    f.read(reinterpret_cast<char*>(t.p->data()), n * sizeof(double));
    f.read(reinterpret_cast<char*>(t.m->data()), n * sizeof(double));
  }
  if (!f) throw std::runtime_error("load_checkpoint: truncated file " + path);
  return rng_state;
}

}  // namespace mdmx::nn
