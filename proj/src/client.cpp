#include "hyfem/client.hpp"

#include <algorithm>
#include <numeric>

#include "hyfem/errors.hpp"
#include "hyfem/random.hpp"

namespace hyfem::federation {

double data_loss(const ClientState& client) {
  double total = 0;
  for (const auto& s : client.data->samples()) {
    const nn::Vector p = nn::predict<double>(client.extractors, client.head, s.blocks);
    total += nn::cross_entropy(p, s.label);
  }
  return total / static_cast<double>(client.data->size());
}

double local_objective(const ClientState& client, const LocalAnchors& anchors, double mu, double lambda_feat) {
  if (anchors.extractors.size() != client.extractors.size())
    throw StructuralError("one extractor anchor per owned block required");
  double value = data_loss(client);
  if (anchors.head) value += mu * nn::squared_distance(client.head, *anchors.head);
  for (std::size_t k = 0; k < client.extractors.size(); ++k)
    value += lambda_feat * nn::squared_distance(client.extractors[k], anchors.extractors[k]);
  return value;
}

double local_gradient(const ClientState& client, const LocalAnchors* anchors, double mu, double lambda_feat,
                      std::span<const std::size_t> batch, std::vector<nn::Gradients>& extractor_grads,
                      nn::Gradients& head_grad) {
  if (batch.empty()) throw InputError("empty mini-batch");
  auto acc = nn::zero_loss_and_grad<double>(client.extractors, client.head);
  const double w = 1.0 / static_cast<double>(batch.size());
  for (auto i : batch) {
    const auto& s = client.data->view(i);
    nn::accumulate_loss_and_grad<double>(client.extractors, client.head, s.blocks, s.label, w, acc);
  }
  if (anchors) {
    if (anchors->extractors.size() != client.extractors.size())
      throw StructuralError("one extractor anchor per owned block required");
    for (std::size_t k = 0; k < client.extractors.size(); ++k)
      nn::add_difference(acc.extractors[k], client.extractors[k], anchors->extractors[k], 2.0 * lambda_feat);
    if (anchors->head) nn::add_difference(acc.head, client.head, *anchors->head, 2.0 * mu);
  }
  extractor_grads = std::move(acc.extractors);
  head_grad = std::move(acc.head);
  return acc.loss;
}

std::vector<std::vector<std::size_t>> draw_batches(const ClientState& client, std::size_t steps,
                                                   std::size_t batch_size, std::uint64_t round) {
  const std::size_t n = client.data->size();
  const std::size_t b = std::min(batch_size, n);
  auto rng = make_rng(client.seed, {0x62617463ULL, round});
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::shuffle(perm.begin(), perm.end(), rng);
  std::size_t cursor = 0;
  std::vector<std::vector<std::size_t>> batches(steps);
  for (auto& batch : batches) {
    batch.reserve(b);
    while (batch.size() < b) {
      if (cursor == n) {
        std::shuffle(perm.begin(), perm.end(), rng);
        cursor = 0;
      }
      batch.push_back(perm[cursor++]);
    }
  }
  return batches;
}

namespace {

ClientState run_sgd(const ClientState& client, const LocalAnchors* anchors, const RoundConfig& cfg, double lr,
                    std::uint64_t round) {
  ClientState out = client;
  if (lr == 0.0) return out;
  const auto batches = draw_batches(client, cfg.local_steps, cfg.batch_size, round);
  std::vector<nn::Gradients> eg;
  nn::Gradients hg;
  for (const auto& batch : batches) {
    local_gradient(out, anchors, cfg.mu, cfg.lambda_feat, batch, eg, hg);
    for (std::size_t k = 0; k < out.extractors.size(); ++k) nn::apply_sgd(out.extractors[k], eg[k], lr);
    nn::apply_sgd(out.head, hg, lr);
  }
  return out;
}

}  // namespace

ClientState local_update_prox(const ClientState& client, const LocalAnchors& anchors, const RoundConfig& cfg,
                              double lr, std::uint64_t round) {
  if (cfg.mode != LocalMode::Prox) throw InputError("local_update_prox requires prox mode");
  return run_sgd(client, &anchors, cfg, lr, round);
}

ClientState local_update_avg(const ClientState& client, const RoundConfig& cfg, double lr, std::uint64_t round) {
  if (cfg.mode != LocalMode::Avg) throw InputError("local_update_avg requires avg mode");
  return run_sgd(client, nullptr, cfg, lr, round);
}

}  // namespace hyfem::federation
