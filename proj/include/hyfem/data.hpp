#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "hyfem/nn.hpp"
#include "hyfem/schema.hpp"

namespace hyfem::data {

using nn::Vector;

struct Sample {
  std::int64_t id = 0;
  std::vector<Vector> blocks;
  Eigen::Index label = 0;
};

bool operator==(const Sample& a, const Sample& b);

// The client-visible slice of a sample: only the owned blocks, in global
// block order, plus the label.
struct LocalSample {
  std::int64_t id = 0;
  std::vector<Vector> blocks;
  Eigen::Index label = 0;
};

// One client's training data. Blocks outside the feature set are dropped at
// construction, so a view can never reveal them.
class ClientDataset {
 public:
  ClientDataset(std::size_t client_id, std::vector<std::size_t> feature_set, std::span<const Sample> samples,
                std::span<const std::size_t> sample_indices);

  std::size_t client_id() const { return client_id_; }
  const std::vector<std::size_t>& feature_set() const { return feature_set_; }
  const std::vector<std::int64_t>& sample_ids() const { return sample_ids_; }
  std::size_t size() const { return samples_.size(); }
  const LocalSample& view(std::size_t i) const { return samples_.at(i); }
  std::span<const LocalSample> samples() const { return samples_; }

 private:
  std::size_t client_id_;
  std::vector<std::size_t> feature_set_;
  std::vector<std::int64_t> sample_ids_;
  std::vector<LocalSample> samples_;
};

// Restricts a full-feature sample to `feature_set` (sorted block indices).
std::vector<Vector> select_blocks(const Sample& sample, std::span<const std::size_t> feature_set);

struct PartitionPlan {
  std::vector<std::vector<Eigen::Index>> class_sets;    // per client, sorted
  std::vector<std::vector<std::size_t>> feature_sets;   // per client, sorted
  Eigen::MatrixXi coverage;                             // classes x blocks -> owning clients

  std::size_t num_clients() const { return feature_sets.size(); }
  // Fraction of (class, block) cells held by no client.
  double unused_fraction() const;
  std::vector<std::size_t> block_owner_counts() const;
};

struct Partition {
  std::vector<ClientDataset> clients;
  PartitionPlan plan;
};

// Per-(class, block) centers of the synthetic Gaussian-blob task.
struct SyntheticTask {
  FeatureSchema schema;
  std::vector<std::vector<Vector>> centers;  // [class][block]
};

SyntheticTask make_synthetic_task(const FeatureSchema& schema, double separation, std::uint64_t seed);

// Draws n_per_class samples per class, center + unit Gaussian noise, class-major order, ids from first_id.
std::vector<Sample> sample_synthetic(const SyntheticTask& task, std::size_t n_per_class, std::uint64_t seed,
                                     std::int64_t first_id = 0);

std::vector<Sample> gen_synthetic(const FeatureSchema& schema, std::size_t n_per_class, double separation,
                                  std::uint64_t seed);

Partition partition_hybrid(std::span<const Sample> samples, const FeatureSchema& schema, std::size_t num_clients,
                           std::size_t classes_per_client, std::size_t views_per_client, std::uint64_t seed);

// Builds the coverage matrix from class and feature sets.
Eigen::MatrixXi coverage_matrix(const std::vector<std::vector<Eigen::Index>>& class_sets,
                                const std::vector<std::vector<std::size_t>>& feature_sets, Eigen::Index num_classes,
                                std::size_t num_blocks);

// CSV: blocks concatenated in block order, label last, no header.
std::vector<Sample> load_csv(const std::filesystem::path& path, const FeatureSchema& schema);
void save_csv(const std::filesystem::path& path, std::span<const Sample> samples);
std::vector<Sample> parse_csv(const std::string& text, const FeatureSchema& schema);
std::string format_csv(std::span<const Sample> samples);

// Key-value dump of schema, per-client class/view lists and coverage.
std::string describe(const FeatureSchema& schema, const PartitionPlan& plan);

}  // namespace hyfem::data
