#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "hyfem/config.hpp"
#include "hyfem/data.hpp"
#include "hyfem/orchestrator.hpp"

namespace hyfem::experiment {

struct Dataset {
  data::FeatureSchema schema;
  std::vector<data::Sample> train;
  std::vector<data::Sample> test;
};

// Synthetic data (held-out test set from the same centers, fresh noise) or
// the configured CSV files.
Dataset build_dataset(const config::RunSpec& spec);

struct Outcome {
  double mu = 0;
  data::PartitionPlan plan;
  federation::RunResult result;
};

// One federated run at the given mu.
Outcome execute(const config::RunSpec& spec, const Dataset& dataset, double mu);

// Validates, runs (each sweep entry into out/mu_<value>/), writes
// metrics.csv, matching_trace.csv, summary.txt, partition.txt and config.txt.
std::vector<Outcome> run_experiment(const config::RunSpec& spec);

}  // namespace hyfem::experiment
