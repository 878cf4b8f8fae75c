#pragma once

// One process simulating every client and the server.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hyfem/client.hpp"
#include "hyfem/data.hpp"
#include "hyfem/federation.hpp"
#include "hyfem/server.hpp"

namespace hyfem::federation {

struct Federation {
  data::FeatureSchema schema;
  std::vector<ClientState> clients;  // clients[m].id() == m
  ServerState server;
};

// Global extractors theta^0_d are drawn once and copied to every owner.
// Heads are drawn per client unless cfg.shared_head_init.
Federation initialize(const data::FeatureSchema& schema, std::vector<data::ClientDataset> datasets,
                      const ModelConfig& cfg, std::uint64_t seed);

ClientUpload make_upload(const ClientState& client, const data::FeatureSchema& schema);

// Anchors for the proximal terms; the head anchor is present only once
// theta_0 exists and the client has a pattern.
LocalAnchors anchors_for(const ServerState& server, const ClientState& client, const data::FeatureSchema& schema);

// w_m <- project(Pi_m theta_0), theta_{m,d} <- theta_{0,d}.
void distribute(ServerState& server, std::vector<ClientState>& clients, const data::FeatureSchema& schema);

struct RoundMetrics {
  std::size_t round = 0;
  double lr = 0;
  LocalMode mode = LocalMode::Prox;
  double mu = 0;
  std::vector<double> local_loss_per_client;
  double mean_local_loss = 0;
  std::vector<double> local_acc_per_client;
  double mean_local_acc = 0;
  double global_loss = 0;
  double global_acc = 0;
  double matching_objective = 0;
  MatchingTrace matching;
};

// Local updates (parallel over cfg.workers threads), extractor aggregation,
// matching passes, evaluation, redistribution.
RoundMetrics run_round(Federation& fed, const RoundConfig& cfg, std::size_t round, std::span<const data::Sample> test,
                       std::uint64_t seed);

struct RunResult {
  Federation state;
  std::vector<RoundMetrics> trace;
};

RunResult run(const RoundConfig& cfg, Federation fed, std::span<const data::Sample> test, std::uint64_t seed);

inline constexpr const char* kMetricsHeader =
    "round,lr,mode,mu,mean_local_loss,mean_local_acc,global_loss,global_acc,matching_objective";

std::string metrics_csv(std::span<const RoundMetrics> trace);
// round,pass,client,assignment_cost,objective
std::string matching_trace_csv(std::span<const RoundMetrics> trace);

std::string format_number(double v);

}  // namespace hyfem::federation
