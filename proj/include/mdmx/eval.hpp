#pragma once

// Ground-truth-aware evaluation: test accuracy, OOD AUROC (Mann-Whitney
// rank form, ties counted 1/2), clean-split precision/recall, and the JSONL
// metrics stream. This is the only code that reads GroundTruth.

#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "mdmx/datagen.hpp"
#include "mdmx/nn.hpp"

namespace mdmx::eval {

// Fraction of argmax-correct predictions; argmax ties go to the smaller
// class index.
double accuracy(const nn::Model& model, const Matrix& x,
                const std::vector<int>& labels);

// AUROC of `scores` ranking positives above negatives. Throws if either
// class is empty.
double auroc(const std::vector<double>& scores, const std::vector<bool>& positive);

struct PrecisionRecall {
  double precision = 0.0;
  double recall = 0.0;
  bool empty_selection = false;
};

// Quality of the clean split: positives are the truly-clean samples among
// `active`.
PrecisionRecall selection_prf(const std::vector<std::size_t>& clean_idx,
                              const std::vector<std::size_t>& active,
                              const std::vector<datagen::GroundTruth>& truth);

struct MetricsRecord {
  int round = 0;
  int epoch = 0;
  double l_sup = 0.0;
  double l_unsup = 0.0;
  double l_self = 0.0;
  double test_acc = 0.0;
  std::optional<double> ood_auroc;
  std::optional<double> sel_p;
  std::optional<double> sel_r;

  bool operator==(const MetricsRecord&) const = default;
};

// One fixed-layout JSON object per line, schema version 1, floats with 17
// significant digits (byte-stable for determinism checks).
std::string to_json_line(const MetricsRecord& r);
std::vector<MetricsRecord> read_metrics(const std::string& path);

class MetricsWriter {
 public:
  explicit MetricsWriter(const std::string& path);
  void write(const MetricsRecord& r);
  void flush();

 private:
  std::string path_;
  std::ofstream stream_;  // append-only; kept open for the run
};

}  // namespace mdmx::eval
