#pragma once

// Neuron matching between client inference heads and the global head.
//
// A head is a one-hidden-layer Mlp. Its hidden neuron i is described by the
// row [in-weights_i | bias_i | out-weights_i] where out-weights_i is column i
// of the output layer. Client heads are embedded into the global input layout
// (D*E columns) with zero columns for blocks the client does not own; those
// columns are masked out of every distance, so dist(Pi_m theta_0, w_m) is
// measured in the client's own parameter space. The output bias is shared by
// label index and is not matched.

#include <cstddef>
#include <span>
#include <vector>

#include "hyfem/hungarian.hpp"
#include "hyfem/nn.hpp"
#include "hyfem/schema.hpp"

namespace hyfem::matching {

using nn::Matrix;
using nn::Mlp;
using nn::Vector;

// Hard assignment Pi_m: real local neuron i -> global neuron assignment[i].
struct MatchingPattern {
  std::size_t client_id = 0;
  std::vector<Eigen::Index> assignment;
  Eigen::Index global_width = 0;

  Eigen::Index local_width() const { return static_cast<Eigen::Index>(assignment.size()); }
  // H_m x H_0 with a single 1 per row.
  Matrix matrix() const;
  bool valid() const;

  static MatchingPattern identity(std::size_t client_id, Eigen::Index local_width, Eigen::Index global_width);
};

// Client head rewritten against the global input layout.
struct EmbeddedHead {
  Mlp model;
  Vector column_mask;  // 1 for columns backed by an owned block, 0 otherwise

  Eigen::Index hidden_width() const { return model.layers.front().out_width(); }
};

struct GlobalHead {
  Mlp model;                       // D*E -> H_0 (ReLU) -> C (softmax)
  std::vector<int> match_counts;   // real local neurons assigned to each global neuron

  Eigen::Index hidden_width() const { return model.layers.front().out_width(); }
};

// Checks the one-hidden-layer head layout (ReLU hidden, softmax output).
void validate_head(const Mlp& head);

// Zero-initialised global head.
GlobalHead make_global_head(Eigen::Index input_width, Eigen::Index hidden_width, Eigen::Index num_classes);

// Local head (input |D_m|*E) -> embedded head (input D*E).
EmbeddedHead embed_local_head(const Mlp& head, std::span<const std::size_t> feature_set,
                              const data::FeatureSchema& schema);

// Inverse of embed_local_head: keeps only the owned block columns.
Mlp project_head(const Mlp& embedded, std::span<const std::size_t> feature_set, const data::FeatureSchema& schema);

Vector column_mask(std::span<const std::size_t> feature_set, const data::FeatureSchema& schema);

// H x (in + 1 + C) neuron descriptors.
Matrix neuron_rows(const Mlp& head);
// Mask aligned with neuron_rows (column mask, then ones for bias and out-weights).
Vector neuron_mask(const EmbeddedHead& head);
// Writes neuron descriptors back into a head of matching shape.
void set_neuron_rows(Mlp& head, const Matrix& rows);

// Padded square cost: cost(i, j) = masked ||local_i - global_j||^2 for real
// rows i < local.rows(); dummy rows cost 0 everywhere so they never steer the
// assignment of real neurons.
Matrix matching_cost(const Matrix& global_rows, const Matrix& local_rows, const Vector& mask);

struct MatchResult {
  MatchingPattern pattern;
  double cost = 0;  // sum over real rows
};

MatchResult match_neurons(const Matrix& global_rows, const Matrix& local_rows, const Vector& mask,
                          std::size_t client_id);

// Throws CapacityError when H_m > H_0.
MatchResult match_client(const GlobalHead& global, const EmbeddedHead& local, std::size_t client_id);

// Per-coordinate mean of the real local neurons assigned to each global
// neuron (masked coordinates excluded); coordinates nobody contributes to
// keep `prev`. counts receives assigned-neuron totals per global neuron.
Matrix average_matched(const Matrix& prev, std::span<const MatchingPattern> patterns,
                       std::span<const Matrix> local_rows, std::span<const Vector> masks,
                       std::vector<int>* counts = nullptr);

// Exact minimiser of sum_m dist(Pi_m theta_0, w_m) over theta_0 for fixed
// patterns. patterns[k] belongs to heads[k].
GlobalHead update_global_head(std::span<const MatchingPattern> patterns, std::span<const EmbeddedHead> heads,
                              const GlobalHead& prev);

// Pi_m theta_0 as an embedded head with H_m hidden neurons.
Mlp apply_pattern(const GlobalHead& global, const MatchingPattern& pattern);

// project(Pi_m theta_0) in the client's own layout.
Mlp pull_head(const GlobalHead& global, const MatchingPattern& pattern, std::span<const std::size_t> feature_set,
              const data::FeatureSchema& schema);

// dist(Pi_m theta_0, w_m), masked squared Euclidean.
double head_distance(const GlobalHead& global, const MatchingPattern& pattern, const EmbeddedHead& head);

double matching_objective(const GlobalHead& global, std::span<const MatchingPattern> patterns,
                          std::span<const EmbeddedHead> heads);

}  // namespace hyfem::matching
