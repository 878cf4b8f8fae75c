#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "hyfem/data.hpp"
#include "hyfem/federation.hpp"
#include "hyfem/nn.hpp"

namespace hyfem::federation {

struct ClientState {
  std::shared_ptr<const data::ClientDataset> data;
  std::vector<nn::Mlp> extractors;  // theta_{m,d}, aligned with data->feature_set()
  nn::Mlp head;                     // w_m, input |D_m|*E
  std::uint64_t seed = 0;

  std::size_t id() const { return data->client_id(); }
  const std::vector<std::size_t>& feature_set() const { return data->feature_set(); }
};

// Server quantities a client regularises towards during one round.
struct LocalAnchors {
  std::vector<nn::Mlp> extractors;  // theta_{0,d} for d in D_m
  std::optional<nn::Mlp> head;      // Pi_m theta_0 in the client's layout; none before theta_0 exists
};

// Mean cross-entropy over the client's own samples.
double data_loss(const ClientState& client);

// data_loss + mu * ||w_m - Pi_m theta_0||^2 + lambda_feat * sum_d ||theta_{m,d} - theta_{0,d}||^2.
// The head term is skipped when anchors.head is empty.
double local_objective(const ClientState& client, const LocalAnchors& anchors, double mu, double lambda_feat);

// Exact gradient of local_objective restricted to the given sample indices
// (data term averaged over them). Returns the data-term value on the batch.
double local_gradient(const ClientState& client, const LocalAnchors* anchors, double mu, double lambda_feat,
                      std::span<const std::size_t> batch, std::vector<nn::Gradients>& extractor_grads,
                      nn::Gradients& head_grad);

// Mini-batch order for one round: sample indices reshuffled each pass over
// the local data, drawn only from the client's own seed.
std::vector<std::vector<std::size_t>> draw_batches(const ClientState& client, std::size_t steps,
                                                   std::size_t batch_size, std::uint64_t round);

// Q mini-batch SGD steps on local_objective.
ClientState local_update_prox(const ClientState& client, const LocalAnchors& anchors, const RoundConfig& cfg,
                              double lr, std::uint64_t round);

// Q mini-batch SGD steps on the data loss alone.
ClientState local_update_avg(const ClientState& client, const RoundConfig& cfg, double lr, std::uint64_t round);

}  // namespace hyfem::federation
