#pragma once

// Run configuration: flat dotted keys (`rounds.T = 32`), one per line,
// '#' starts a comment. Built-in scenarios supply every default.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hyfem/federation.hpp"
#include "hyfem/schema.hpp"

namespace hyfem::config {

struct DataSpec {
  Eigen::Index num_blocks = 4;
  Eigen::Index block_width = 4;
  Eigen::Index embed_width = 4;
  Eigen::Index num_classes = 8;
  std::size_t n_per_class = 64;
  std::size_t n_test_per_class = 32;
  double separation = 6.0;
  std::uint64_t seed = 0;  // 0: use the run seed
  std::string train_csv;   // empty: synthetic data
  std::string test_csv;

  data::FeatureSchema schema() const;
};

struct PartitionSpec {
  std::size_t clients = 4;
  std::size_t classes_per_client = 6;
  std::size_t views_per_client = 3;
};

struct RunSpec {
  std::string scenario;
  DataSpec data;
  PartitionSpec partition;
  federation::ModelConfig model;
  federation::RoundConfig rounds;
  std::vector<double> mu_sweep;  // empty: single run at rounds.mu
  std::uint64_t seed = 1;
  std::string out;

  std::uint64_t data_seed() const { return data.seed ? data.seed : seed; }
};

struct Overrides {
  std::optional<std::string> scenario;
  std::optional<double> mu;
  std::optional<std::string> mode;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> rounds;
  std::optional<std::string> out;
  std::optional<std::size_t> workers;
};

std::vector<std::string> scenario_names();

// Throws ConfigError for unknown names.
RunSpec scenario_defaults(const std::string& name);

// Sets one key. Throws ConfigError naming the key on unknown keys or bad values.
void apply_key(RunSpec& spec, const std::string& key, const std::string& value);

// Resolution order: scenario defaults, HYFEM_OUT for `out`, file text, flags.
// `default_out` stands in for HYFEM_OUT when given.
RunSpec parse_config(const std::optional<std::string>& file_text, const Overrides& flags,
                     const std::optional<std::string>& default_out = std::nullopt);

RunSpec load_config(const std::optional<std::string>& path, const Overrides& flags);

void validate(const RunSpec& spec);

// Every key, loadable by parse_config.
std::string to_config_text(const RunSpec& spec);

}  // namespace hyfem::config
