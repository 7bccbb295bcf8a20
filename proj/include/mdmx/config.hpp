#pragma once

// Flat key/value experiment config with one section per module. Unknown
// keys are rejected by name; the effective config (defaults applied) can be
// echoed back out and re-loaded to reproduce a run.

#include <string>

#include "mdmx/datagen.hpp"
#include "mdmx/pipeline.hpp"

namespace mdmx::config {

struct DataParams {
  std::size_t n_per_class = 500;
  int n_classes = 4;
  int dim = 2;
  double spread = 1.0;
  std::size_t n_test_per_class = 100;
};

struct ExperimentConfig {
  DataParams data;
  datagen::NoiseSpec noise;
  pipeline::PipelineConfig pipe;
  std::string dataset = "train.csv";
  std::string test_dataset = "test.csv";

  void validate() const;
};

ExperimentConfig load_config(const std::string& path);
void save_config(const ExperimentConfig& cfg, const std::string& path);

// Apply config text that is already in memory (used by tests).
ExperimentConfig parse_config(const std::string& text, const std::string& origin);
std::string serialize_config(const ExperimentConfig& cfg);

}  // namespace mdmx::config
