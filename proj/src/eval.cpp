#include "mdmx/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace mdmx::eval {

double accuracy(const nn::Model& model, const Matrix& x,
                const std::vector<int>& labels) {
  if (x.rows == 0) throw std::invalid_argument("accuracy: empty test set");
  Matrix h, logits;
  model.encode(x, h);
  model.classify(h, logits);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < x.rows; ++i) {
    const double* row = logits.row(i);
    std::size_t best = 0;
    for (std::size_t c = 1; c < logits.cols; ++c)
      if (row[c] > row[best]) best = c;
    if (static_cast<int>(best) == labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(x.rows);
}

double auroc(const std::vector<double>& scores, const std::vector<bool>& positive) {
  std::size_t n_pos = 0;
  for (bool p : positive) n_pos += p ? 1 : 0;
  const std::size_t n_neg = positive.size() - n_pos;
  if (n_pos == 0 || n_neg == 0)
    throw std::invalid_argument("auroc: need both positive and negative samples");

  // Mann-Whitney with midranks for ties
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);  // ranks are 1-based
    for (std::size_t m = i; m < j; ++m)
      if (positive[order[m]]) rank_sum_pos += midrank;
    i = j;
  }
  const double u = rank_sum_pos - 0.5 * static_cast<double>(n_pos) * (n_pos + 1);
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

PrecisionRecall selection_prf(const std::vector<std::size_t>& clean_idx,
                              const std::vector<std::size_t>& active,
                              const std::vector<datagen::GroundTruth>& truth) {
  std::size_t truly_clean_active = 0;
  for (std::size_t i : active)
    if (truth[i].kind == datagen::NoiseKind::clean) ++truly_clean_active;
  std::size_t hit = 0;
  for (std::size_t i : clean_idx)
    if (truth[i].kind == datagen::NoiseKind::clean) ++hit;

  PrecisionRecall out;
  if (clean_idx.empty()) {
    out.empty_selection = true;
    out.precision = 0.0;
  } else {
    out.precision = static_cast<double>(hit) / static_cast<double>(clean_idx.size());
  }
  out.recall = truly_clean_active == 0
                   ? 0.0
                   : static_cast<double>(hit) / static_cast<double>(truly_clean_active);
  return out;
}

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt_opt(const std::optional<double>& v) {
  return v ? fmt(*v) : "null";
}

}  // namespace

std::string to_json_line(const MetricsRecord& r) {
  std::string s = "{\"v\":1,\"round\":" + std::to_string(r.round) +
                  ",\"epoch\":" + std::to_string(r.epoch) +
                  ",\"l_sup\":" + fmt(r.l_sup) +
                  ",\"l_unsup\":" + fmt(r.l_unsup) +
                  ",\"l_self\":" + fmt(r.l_self) +
                  ",\"test_acc\":" + fmt(r.test_acc) +
                  ",\"ood_auroc\":" + fmt_opt(r.ood_auroc) +
                  ",\"sel_p\":" + fmt_opt(r.sel_p) +
                  ",\"sel_r\":" + fmt_opt(r.sel_r) + "}";
  return s;
}

std::vector<MetricsRecord> read_metrics(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("read_metrics: cannot open " + path);
  std::vector<MetricsRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const std::exception& e) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": malformed JSON: " + e.what());
    }
    const auto where = path + ":" + std::to_string(lineno);
    if (!j.contains("v") || j["v"] != 1)
      throw std::runtime_error(where + ": missing or unsupported schema version");
    for (const char* key : {"round", "epoch", "l_sup", "l_unsup", "l_self",
                            "test_acc", "ood_auroc", "sel_p", "sel_r"})
      if (!j.contains(key))
        throw std::runtime_error(where + ": missing field '" + key + "'");
    MetricsRecord r;
    r.round = j["round"].get<int>();
    r.epoch = j["epoch"].get<int>();
    r.l_sup = j["l_sup"].get<double>();
    r.l_unsup = j["l_unsup"].get<double>();
    r.l_self = j["l_self"].get<double>();
    r.test_acc = j["test_acc"].get<double>();
    if (!j["ood_auroc"].is_null()) r.ood_auroc = j["ood_auroc"].get<double>();
    if (!j["sel_p"].is_null()) r.sel_p = j["sel_p"].get<double>();
    if (!j["sel_r"].is_null()) r.sel_r = j["sel_r"].get<double>();
    out.push_back(r);
  }
  return out;
}

MetricsWriter::MetricsWriter(const std::string& path)
    : path_(path), stream_(path, std::ios::out | std::ios::trunc) {
  if (!stream_) throw std::runtime_error("MetricsWriter: cannot write " + path);
}

void MetricsWriter::write(const MetricsRecord& r) {
  stream_ << to_json_line(r) << "\n";
}

void MetricsWriter::flush() { stream_.flush(); }

}  // namespace mdmx::eval
