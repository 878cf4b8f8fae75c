#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "hyfem/client.hpp"
#include "hyfem/data.hpp"
#include "hyfem/server.hpp"

namespace hyfem::eval {

// Fraction of samples whose argmax prediction (lowest class on ties) matches
// the label, using only the blocks in `feature_set`. 0 for an empty set.
double accuracy(std::span<const nn::Mlp> extractors, const nn::Mlp& head, std::span<const std::size_t> feature_set,
                std::span<const data::Sample> samples);

double mean_loss(std::span<const nn::Mlp> extractors, const nn::Mlp& head, std::span<const std::size_t> feature_set,
                 std::span<const data::Sample> samples);

// Client's partial-feature model on full-feature samples.
double eval_local(const federation::ClientState& client, std::span<const data::Sample> test);

// theta_0 over all D global extractors.
double eval_global(const federation::ServerState& server, std::span<const data::Sample> test);
double global_loss(const federation::ServerState& server, std::span<const data::Sample> test);

struct EvalReport {
  std::size_t round = 0;
  std::vector<double> local_acc_per_client;
  double mean_local_acc = 0;
  double global_acc = 0;
  double global_loss = 0;
  double local_loss = 0;
};

EvalReport make_report(std::size_t round, std::vector<double> local_acc_per_client, double global_acc,
                       double global_loss, double local_loss);

// key=value lines.
std::string summary_text(const EvalReport& report);

}  // namespace hyfem::eval
