#include "mdmx/config.hpp"

#include <charconv>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace mdmx::config {

namespace {

struct Entry {
  std::string key;  // "section.key"
  std::function<void(const std::string&)> set;
  std::function<std::string()> get;
};

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double to_double(const std::string& s, const std::string& key) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (...) {
    throw std::runtime_error("config: bad number '" + s + "' for " + key);
  }
}

long long to_int(const std::string& s, const std::string& key) {
  long long v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size())
    throw std::runtime_error("config: bad integer '" + s + "' for " + key);
  return v;
}

std::uint64_t to_u64(const std::string& s, const std::string& key) {
  std::uint64_t v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size())
    throw std::runtime_error("config: bad unsigned '" + s + "' for " + key);
  return v;
}

bool to_bool(const std::string& s, const std::string& key) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw std::runtime_error("config: bad bool '" + s + "' for " + key);
}

std::vector<Entry> entries(ExperimentConfig& c) {
  std::vector<Entry> e;
  auto add_d = [&](const std::string& key, double& ref) {
    e.push_back({key, [&ref, key](const std::string& s) { ref = to_double(s, key); },
                 [&ref] { return fmt_double(ref); }});
  };
  auto add_i = [&](const std::string& key, int& ref) {
    e.push_back({key, [&ref, key](const std::string& s) { ref = static_cast<int>(to_int(s, key)); },
                 [&ref] { return std::to_string(ref); }});
  };
  auto add_z = [&](const std::string& key, std::size_t& ref) {
    e.push_back({key,
                 [&ref, key](const std::string& s) {
                   ref = static_cast<std::size_t>(to_int(s, key));
                 },
                 [&ref] { return std::to_string(ref); }});
  };
  auto add_u = [&](const std::string& key, std::uint64_t& ref) {
    e.push_back({key, [&ref, key](const std::string& s) { ref = to_u64(s, key); },
                 [&ref] { return std::to_string(ref); }});
  };
  auto add_b = [&](const std::string& key, bool& ref) {
    e.push_back({key, [&ref, key](const std::string& s) { ref = to_bool(s, key); },
                 [&ref] { return ref ? std::string("true") : std::string("false"); }});
  };
  auto add_s = [&](const std::string& key, std::string& ref) {
    e.push_back({key, [&ref](const std::string& s) { ref = s; }, [&ref] { return ref; }});
  };

  add_z("data.n_per_class", c.data.n_per_class);
  add_i("data.n_classes", c.data.n_classes);
  add_i("data.dim", c.data.dim);
  add_d("data.spread", c.data.spread);
  add_z("data.n_test_per_class", c.data.n_test_per_class);

  add_d("noise.r_in", c.noise.r_in);
  add_d("noise.r_out", c.noise.r_out);
  e.push_back({"noise.id_mode",
               [&c](const std::string& s) {
                 if (s == "symmetric") c.noise.id_mode = datagen::IdNoiseMode::symmetric;
                 else if (s == "asymmetric") c.noise.id_mode = datagen::IdNoiseMode::asymmetric;
                 else throw std::runtime_error("config: bad noise.id_mode '" + s + "'");
               },
               [&c] {
                 return c.noise.id_mode == datagen::IdNoiseMode::symmetric
                            ? std::string("symmetric")
                            : std::string("asymmetric");
               }});
  e.push_back({"noise.ood_source",
               [&c](const std::string& s) {
                 if (s == "uniform_ring") c.noise.ood_source = datagen::OodSource::uniform_ring;
                 else if (s == "shifted_blobs") c.noise.ood_source = datagen::OodSource::shifted_blobs;
                 else throw std::runtime_error("config: bad noise.ood_source '" + s + "'");
               },
               [&c] {
                 return c.noise.ood_source == datagen::OodSource::uniform_ring
                            ? std::string("uniform_ring")
                            : std::string("shifted_blobs");
               }});

  add_i("model.hidden_dim", c.pipe.model.hidden_dim);
  add_i("model.embed_dim", c.pipe.model.embed_dim);
  add_i("model.proj_hidden", c.pipe.model.proj_hidden);
  add_i("model.proj_dim", c.pipe.model.proj_dim);

  add_d("augment.weak_jitter_sigma", c.pipe.aug.weak_jitter_sigma);
  add_d("augment.strong_jitter_sigma", c.pipe.aug.strong_jitter_sigma);
  add_d("augment.strong_dropout_p", c.pipe.aug.strong_dropout_p);
  add_d("augment.strong_scale_lo", c.pipe.aug.strong_scale_lo);
  add_d("augment.strong_scale_hi", c.pipe.aug.strong_scale_hi);

  add_d("contrastive.tau", c.pipe.ssl_tau);

  add_d("mix.T", c.pipe.mix.T);
  add_d("mix.alpha", c.pipe.mix.alpha);

  add_d("loss.lambda_u", c.pipe.loss.lambda_u);
  add_d("loss.lambda_c", c.pipe.loss.lambda_c);
  add_d("loss.ramp_epochs", c.pipe.loss.ramp_epochs);
  add_d("loss.sce_alpha", c.pipe.loss.sce_alpha);
  add_d("loss.sce_beta", c.pipe.loss.sce_beta);
  add_d("loss.log_clip", c.pipe.loss.log_clip);

  add_d("optim.momentum", c.pipe.opt.momentum);
  add_d("optim.weight_decay", c.pipe.opt.weight_decay);
  add_d("optim.lr_classifier", c.pipe.opt.lr_classifier);
  add_d("optim.lr_backbone", c.pipe.opt.lr_backbone);
  add_d("optim.lr_scale", c.pipe.opt.lr_scale);
  add_i("optim.batch_size", c.pipe.batch_size);

  add_i("pipeline.epochs_ssl", c.pipe.epochs_ssl);
  add_i("pipeline.epochs_warmup", c.pipe.epochs_warmup);
  add_i("pipeline.epochs_semi", c.pipe.epochs_semi);
  add_i("pipeline.rounds", c.pipe.rounds);
  add_i("pipeline.refresh_every", c.pipe.refresh_every);
  add_d("pipeline.ood_fraction_initial", c.pipe.ood_fraction_initial);
  add_d("pipeline.ood_fraction_per_round", c.pipe.ood_fraction_per_round);
  add_d("pipeline.tau2", c.pipe.tau2);
  add_i("pipeline.k", c.pipe.knn_k);
  add_b("pipeline.warmup_freeze_backbone", c.pipe.warmup_freeze_backbone);

  add_u("run.seed", c.pipe.seed);
  add_s("run.dataset", c.dataset);
  add_s("run.test_dataset", c.test_dataset);
  return e;
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace

void ExperimentConfig::validate() const {
  if (noise.r_in < 0 || noise.r_in > 1 || noise.r_out < 0 || noise.r_out > 1 ||
      noise.r_in + noise.r_out > 1.0)
    throw std::runtime_error("config: require r_in, r_out in [0,1] with r_in + r_out <= 1");
  if (pipe.tau2 <= 0.0 || pipe.tau2 >= 1.0)
    throw std::runtime_error("config: pipeline.tau2 must be in (0,1)");
  if (pipe.ood_fraction_initial < 0 || pipe.ood_fraction_initial >= 1 ||
      pipe.ood_fraction_per_round < 0 || pipe.ood_fraction_per_round >= 1)
    throw std::runtime_error("config: OOD fractions must be in [0,1)");
  if (pipe.epochs_ssl < 0 || pipe.epochs_warmup < 0 || pipe.epochs_semi < 0 ||
      pipe.rounds < 0)
    throw std::runtime_error("config: epoch counts must be >= 0");
  if (pipe.batch_size < 2)
    throw std::runtime_error("config: optim.batch_size must be >= 2");
  pipe.aug.validate();
  pipe.mix.validate();
}

ExperimentConfig parse_config(const std::string& text, const std::string& origin) {
  ExperimentConfig cfg;
  auto table = entries(cfg);
  std::map<std::string, Entry*> lookup;
  for (auto& e : table) lookup[e.key] = &e;

  std::istringstream in(text);
  std::string line, section;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    if (t.front() == '[') {
      if (t.back() != ']')
        throw std::runtime_error(origin + ":" + std::to_string(lineno) + ": bad section header");
      section = t.substr(1, t.size() - 2);
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error(origin + ":" + std::to_string(lineno) + ": expected key = value");
    const std::string key = section + "." + trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    const auto it = lookup.find(key);
    if (it == lookup.end())
      throw std::runtime_error(origin + ":" + std::to_string(lineno) + ": unknown key '" + key + "'");
    it->second->set(value);
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("config: cannot open " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str(), path);
}

std::string serialize_config(const ExperimentConfig& cfg) {
  auto table = entries(const_cast<ExperimentConfig&>(cfg));
  std::string out;
  std::string section;
  for (const auto& e : table) {
    const auto dot = e.key.find('.');
    const std::string sec = e.key.substr(0, dot);
    if (sec != section) {
      if (!out.empty()) out += "\n";
      out += "[" + sec + "]\n";
      section = sec;
    }
    out += e.key.substr(dot + 1) + " = " + e.get() + "\n";
  }
  return out;
}

void save_config(const ExperimentConfig& cfg, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("config: cannot write " + path);
  f << serialize_config(cfg);
}

}  // namespace mdmx::config
