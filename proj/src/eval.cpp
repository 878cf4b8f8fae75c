#include "hyfem/eval.hpp"

#include <numeric>
#include <sstream>

#include "hyfem/errors.hpp"

namespace hyfem::eval {

namespace {

std::vector<std::size_t> all_blocks(std::size_t n) {
  std::vector<std::size_t> out(n);
  std::iota(out.begin(), out.end(), std::size_t{0});
  return out;
}

}  // namespace

double accuracy(std::span<const nn::Mlp> extractors, const nn::Mlp& head, std::span<const std::size_t> feature_set,
                std::span<const data::Sample> samples) {
  if (samples.empty()) return 0.0;
  std::size_t correct = 0;
  for (const auto& s : samples) {
    const auto blocks = data::select_blocks(s, feature_set);
    const nn::Vector p = nn::predict<double>(extractors, head, blocks);
    if (nn::argmax(p) == s.label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(samples.size());
}

double mean_loss(std::span<const nn::Mlp> extractors, const nn::Mlp& head, std::span<const std::size_t> feature_set,
                 std::span<const data::Sample> samples) {
  if (samples.empty()) return 0.0;
  double total = 0;
  for (const auto& s : samples) {
    const auto blocks = data::select_blocks(s, feature_set);
    total += nn::cross_entropy(nn::predict<double>(extractors, head, blocks), s.label);
  }
  return total / static_cast<double>(samples.size());
}

double eval_local(const federation::ClientState& client, std::span<const data::Sample> test) {
  return accuracy(client.extractors, client.head, client.feature_set(), test);
}

double eval_global(const federation::ServerState& server, std::span<const data::Sample> test) {
  return accuracy(server.extractors, server.head.model, all_blocks(server.extractors.size()), test);
}

double global_loss(const federation::ServerState& server, std::span<const data::Sample> test) {
  return mean_loss(server.extractors, server.head.model, all_blocks(server.extractors.size()), test);
}

EvalReport make_report(std::size_t round, std::vector<double> local_acc_per_client, double global_acc,
                       double global_loss, double local_loss) {
  EvalReport r;
  r.round = round;
  r.mean_local_acc = local_acc_per_client.empty()
                         ? 0.0
                         : std::accumulate(local_acc_per_client.begin(), local_acc_per_client.end(), 0.0) /
                               static_cast<double>(local_acc_per_client.size());
  r.local_acc_per_client = std::move(local_acc_per_client);
  r.global_acc = global_acc;
  r.global_loss = global_loss;
  r.local_loss = local_loss;
  return r;
}

std::string summary_text(const EvalReport& report) {
  std::ostringstream out;
  out.precision(17);
  out << "round=" << report.round << '\n';
  out << "mean_local_acc=" << report.mean_local_acc << '\n';
  out << "global_acc=" << report.global_acc << '\n';
  out << "global_loss=" << report.global_loss << '\n';
  out << "local_loss=" << report.local_loss << '\n';
  for (std::size_t m = 0; m < report.local_acc_per_client.size(); ++m)
    out << "client." << m << ".local_acc=" << report.local_acc_per_client[m] << '\n';
  return out.str();
}

}  // namespace hyfem::eval
