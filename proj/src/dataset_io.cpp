#include <cerrno>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "mdmx/datagen.hpp"

namespace mdmx::datagen {

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string truth_path(const std::string& path) {
  std::string base = path;
  if (base.size() > 4 && base.compare(base.size() - 4, 4, ".csv") == 0)
    base.resize(base.size() - 4);
  return base + ".truth.csv";
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

double parse_double(const std::string& s, const std::string& path, std::size_t lineno) {
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0' || errno == ERANGE)
    throw std::runtime_error(path + ":" + std::to_string(lineno) + ": bad float '" + s + "'");
  return v;
}

int parse_int(const std::string& s, const std::string& path, std::size_t lineno) {
  int v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size())
    throw std::runtime_error(path + ":" + std::to_string(lineno) + ": bad integer '" + s + "'");
  return v;
}

}  // namespace

void save_dataset(const NoisyDataset& ds, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("save_dataset: cannot write " + path);
  for (int j = 0; j < ds.dim; ++j) f << "feat_" << j << ",";
  f << "label\n";
  for (std::size_t i = 0; i < ds.features.rows; ++i) {
    const double* row = ds.features.row(i);
    for (int j = 0; j < ds.dim; ++j) f << fmt_double(row[j]) << ",";
    f << ds.given_labels[i] << "\n";
  }
  if (!f) throw std::runtime_error("save_dataset: write failed for " + path);

  if (ds.truth) {
    std::ofstream t(truth_path(path));
    if (!t) throw std::runtime_error("save_dataset: cannot write " + truth_path(path));
    t << "true_label,kind\n";
    for (const GroundTruth& g : *ds.truth) {
      const char* kind = g.kind == NoiseKind::clean     ? "clean"
                         : g.kind == NoiseKind::id_noise ? "id_noise"
                                                         : "ood";
      t << g.true_label << "," << kind << "\n";
    }
  }
}

NoisyDataset load_dataset(const std::string& path, int expected_classes) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("load_dataset: cannot open " + path);

  std::string line;
  if (!std::getline(f, line))
    throw std::runtime_error(path + ":1: empty file");
  const auto header = split_csv(line);
  if (header.size() < 2 || header.back() != "label")
    throw std::runtime_error(path + ":1: expected header feat_0,...,label");
  const int dim = static_cast<int>(header.size()) - 1;
  for (int j = 0; j < dim; ++j)
    if (header[j] != "feat_" + std::to_string(j))
      throw std::runtime_error(path + ":1: unexpected column '" + header[j] + "'");

  std::vector<double> values;
  std::vector<int> labels;
  std::size_t lineno = 1;
  int max_label = -1;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != header.size())
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected " +
                               std::to_string(header.size()) + " fields, got " +
                               std::to_string(cells.size()));
    for (int j = 0; j < dim; ++j) values.push_back(parse_double(cells[j], path, lineno));
    const int label = parse_int(cells.back(), path, lineno);
    if (label < 0)
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": negative label");
    if (expected_classes >= 0 && label >= expected_classes)
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": label " +
                               std::to_string(label) + " >= n_classes " +
                               std::to_string(expected_classes));
    max_label = std::max(max_label, label);
    labels.push_back(label);
  }

  NoisyDataset ds;
  ds.dim = dim;
  ds.given_labels = std::move(labels);
  ds.features.rows = ds.given_labels.size();
  ds.features.cols = dim;
  ds.features.data = std::move(values);
  ds.n_classes = expected_classes >= 0 ? expected_classes : max_label + 1;

  std::ifstream t(truth_path(path));
  if (t) {
    std::string tline;
    if (!std::getline(t, tline) || split_csv(tline) != std::vector<std::string>{"true_label", "kind"})
      throw std::runtime_error(truth_path(path) + ":1: expected header true_label,kind");
    std::vector<GroundTruth> truth;
    std::size_t tn = 1;
    while (std::getline(t, tline)) {
      ++tn;
      if (tline.empty()) continue;
      const auto cells = split_csv(tline);
      if (cells.size() != 2)
        throw std::runtime_error(truth_path(path) + ":" + std::to_string(tn) + ": expected 2 fields");
      GroundTruth g;
      g.true_label = parse_int(cells[0], truth_path(path), tn);
      if (cells[1] == "clean") g.kind = NoiseKind::clean;
      else if (cells[1] == "id_noise") g.kind = NoiseKind::id_noise;
      else if (cells[1] == "ood") g.kind = NoiseKind::ood;
      else
        throw std::runtime_error(truth_path(path) + ":" + std::to_string(tn) + ": bad kind '" + cells[1] + "'");
      if ((g.kind == NoiseKind::ood) != (g.true_label == -1))
        throw std::runtime_error(truth_path(path) + ":" + std::to_string(tn) + ": kind/true_label mismatch");
      truth.push_back(g);
    }
    if (truth.size() != ds.features.rows)
      throw std::runtime_error(truth_path(path) + ": row count " + std::to_string(truth.size()) +
                               " does not match dataset rows " + std::to_string(ds.features.rows));
    ds.truth = std::move(truth);
  }
  return ds;
}

}  // namespace mdmx::datagen
