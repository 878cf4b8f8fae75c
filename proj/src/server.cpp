#include "hyfem/server.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "hyfem/errors.hpp"
#include "hyfem/random.hpp"

namespace hyfem::federation {

std::vector<nn::Mlp> aggregate_extractors(std::span<const ClientUpload> uploads, std::size_t num_blocks) {
  std::vector<nn::Mlp> out;
  out.reserve(num_blocks);
  for (std::size_t d = 0; d < num_blocks; ++d) {
    std::optional<nn::Mlp> sum;
    std::size_t owners = 0;
    for (const auto& up : uploads) {
      const auto it = std::find(up.feature_set.begin(), up.feature_set.end(), d);
      if (it == up.feature_set.end()) continue;
      const auto& theta = up.extractors.at(static_cast<std::size_t>(it - up.feature_set.begin()));
      if (!sum) {
        sum = theta;
      } else {
        if (!nn::same_shape(*sum, theta)) throw StructuralError("extractors for one block differ in shape");
        for (std::size_t l = 0; l < theta.layers.size(); ++l) {
          sum->layers[l].weights += theta.layers[l].weights;
          sum->layers[l].bias += theta.layers[l].bias;
        }
      }
      ++owners;
    }
    if (!sum) throw ConfigError("feature block " + std::to_string(d) + " has no owning client");
    const double inv = 1.0 / static_cast<double>(owners);
    if (owners > 1)
      for (auto& layer : sum->layers) {
        layer.weights *= inv;
        layer.bias *= inv;
      }
    out.push_back(std::move(*sum));
  }
  return out;
}

namespace {

std::vector<matching::EmbeddedHead> collect_heads(std::span<const ClientUpload> uploads) {
  std::vector<matching::EmbeddedHead> heads;
  heads.reserve(uploads.size());
  for (const auto& up : uploads) heads.push_back(up.head);
  return heads;
}

void ensure_slots(ServerState& server, std::span<const ClientUpload> uploads) {
  std::size_t needed = server.patterns.size();
  for (const auto& up : uploads) needed = std::max(needed, up.client_id + 1);
  server.patterns.resize(needed);
}

// theta_0 from every client that currently has a pattern.
void refresh_head(ServerState& server, std::span<const ClientUpload> uploads,
                  const std::vector<matching::EmbeddedHead>& heads) {
  std::vector<matching::MatchingPattern> patterns;
  std::vector<matching::EmbeddedHead> matched;
  for (std::size_t k = 0; k < uploads.size(); ++k) {
    const auto& p = server.patterns[uploads[k].client_id];
    if (!p) continue;
    patterns.push_back(*p);
    matched.push_back(heads[k]);
  }
  server.head = matching::update_global_head(patterns, matched, server.head);
}

}  // namespace

std::vector<matching::MatchingPattern> current_patterns(const ServerState& server,
                                                        std::span<const ClientUpload> uploads) {
  std::vector<matching::MatchingPattern> out;
  out.reserve(uploads.size());
  for (const auto& up : uploads) {
    if (up.client_id >= server.patterns.size() || !server.patterns[up.client_id])
      throw StructuralError("client " + std::to_string(up.client_id) + " has no matching pattern");
    out.push_back(*server.patterns[up.client_id]);
  }
  return out;
}

double matching_objective(const ServerState& server, std::span<const ClientUpload> uploads) {
  const auto heads = collect_heads(uploads);
  return matching::matching_objective(server.head, current_patterns(server, uploads), heads);
}

MatchingTrace run_matching(ServerState& server, std::span<const ClientUpload> uploads, std::size_t passes,
                           std::uint64_t seed) {
  MatchingTrace trace;
  if (uploads.empty()) return trace;
  ensure_slots(server, uploads);
  const auto heads = collect_heads(uploads);

  std::vector<std::size_t> order(uploads.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto rng = make_rng(seed, {0x6d617463ULL});
  std::shuffle(order.begin(), order.end(), rng);

  for (auto k : order) {
    const auto m = uploads[k].client_id;
    if (server.patterns[m]) continue;
    server.patterns[m] = matching::match_client(server.head, heads[k], m).pattern;
    refresh_head(server, uploads, heads);
  }
  server.head_ready = true;
  trace.initial_objective = matching::matching_objective(server.head, current_patterns(server, uploads), heads);

  for (std::size_t p = 0; p < passes; ++p) {
    const auto k = order[p % order.size()];
    const auto m = uploads[k].client_id;
    auto result = matching::match_client(server.head, heads[k], m);
    server.patterns[m] = std::move(result.pattern);
    refresh_head(server, uploads, heads);
    trace.steps.push_back(MatchingStep{
        p, m, result.cost, matching::matching_objective(server.head, current_patterns(server, uploads), heads)});
  }
  return trace;
}

void fixed_matching(ServerState& server, std::span<const ClientUpload> uploads) {
  ensure_slots(server, uploads);
  const auto heads = collect_heads(uploads);
  for (std::size_t k = 0; k < uploads.size(); ++k)
    server.patterns[uploads[k].client_id] =
        matching::MatchingPattern::identity(uploads[k].client_id, heads[k].hidden_width(), server.head.hidden_width());
  refresh_head(server, uploads, heads);
  server.head_ready = true;
}

}  // namespace hyfem::federation
