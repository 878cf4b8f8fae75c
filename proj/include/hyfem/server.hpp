#pragma once

// Server side of the federation. Works only on uploaded parameters and
// matching patterns; it has no access to client samples or labels.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "hyfem/matching.hpp"
#include "hyfem/nn.hpp"

namespace hyfem::federation {

struct ClientUpload {
  std::size_t client_id = 0;
  std::vector<std::size_t> feature_set;
  std::vector<nn::Mlp> extractors;  // aligned with feature_set
  matching::EmbeddedHead head;
};

struct ServerState {
  std::vector<nn::Mlp> extractors;  // theta_{0,d}, one per block
  matching::GlobalHead head;        // theta_0
  std::vector<std::optional<matching::MatchingPattern>> patterns;  // indexed by client id
  bool head_ready = false;          // theta_0 has been built from client heads
};

// Parameter-wise mean of theta_{m,d} over the owners of each block. Reduces
// in upload order. Throws ConfigError for a block with no owner.
std::vector<nn::Mlp> aggregate_extractors(std::span<const ClientUpload> uploads, std::size_t num_blocks);

struct MatchingStep {
  std::size_t pass = 0;
  std::size_t client = 0;
  double assignment_cost = 0;  // Hungarian cost of the selected client
  double objective = 0;        // sum_m dist(Pi_m theta_0, w_m) after the theta_0 update
};

struct MatchingTrace {
  double initial_objective = 0;  // after bootstrapping missing patterns
  std::vector<MatchingStep> steps;
};

// Clients without a pattern are first matched one at a time (in the pass
// order) against the running theta_0. Then `passes` sequential passes each
// re-match one client and recompute theta_0. Clients are visited by cycling a
// permutation drawn from `seed`.
MatchingTrace run_matching(ServerState& server, std::span<const ClientUpload> uploads, std::size_t passes,
                           std::uint64_t seed);

// Identity patterns for every client and the matching theta_0 update.
void fixed_matching(ServerState& server, std::span<const ClientUpload> uploads);

std::vector<matching::MatchingPattern> current_patterns(const ServerState& server,
                                                        std::span<const ClientUpload> uploads);

double matching_objective(const ServerState& server, std::span<const ClientUpload> uploads);

}  // namespace hyfem::federation
