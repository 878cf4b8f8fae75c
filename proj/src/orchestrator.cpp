#include "hyfem/orchestrator.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <thread>

#include "hyfem/errors.hpp"
#include "hyfem/eval.hpp"
#include "hyfem/random.hpp"

namespace hyfem::federation {

std::string to_string(LocalMode mode) { return mode == LocalMode::Prox ? "prox" : "avg"; }

LocalMode parse_mode(const std::string& text) {
  if (text == "prox") return LocalMode::Prox;
  if (text == "avg") return LocalMode::Avg;
  throw ConfigError("mode", "expected prox or avg, got '" + text + "'");
}

void ModelConfig::validate() const {
  if (extractor_hidden < 0) throw ConfigError("model.extractor_hidden", "must be >= 0");
  if (head_hidden < 1) throw ConfigError("model.head_hidden", "must be >= 1");
  if (global_hidden != 0 && global_hidden < head_hidden)
    throw CapacityError("model.global_hidden", "must be 0 or >= model.head_hidden");
  if (embed_activation == nn::Activation::Softmax)
    throw ConfigError("model.embed_activation", "softmax is not a valid embedding activation");
  if (shared_head_init && global_hidden != 0 && global_hidden != head_hidden)
    throw ConfigError("model.shared_head_init", "needs model.global_hidden == model.head_hidden");
}

void RoundConfig::validate() const {
  if (local_steps < 1) throw ConfigError("rounds.Q", "must be >= 1");
  if (matching_passes < 1) throw ConfigError("rounds.P", "must be >= 1");
  if (batch_size < 1) throw ConfigError("rounds.batch_size", "must be >= 1");
  if (!(lr >= 0) || !std::isfinite(lr)) throw ConfigError("lr.initial", "must be finite and >= 0");
  if (!(lr_decay > 0 && lr_decay <= 1)) throw ConfigError("lr.decay", "must lie in (0, 1]");
  if (lr_period < 1) throw ConfigError("lr.period", "must be >= 1");
  if (!(mu >= 0) || !std::isfinite(mu)) throw ConfigError("reg.mu", "must be finite and >= 0");
  if (!(lambda_feat >= 0) || !std::isfinite(lambda_feat))
    throw ConfigError("reg.lambda_feat", "must be finite and >= 0");
  if (workers < 1) throw ConfigError("workers", "must be >= 1");
}

double RoundConfig::lr_at(std::size_t round) const {
  return lr * std::pow(lr_decay, static_cast<double>(round / lr_period));
}

Federation initialize(const data::FeatureSchema& schema, std::vector<data::ClientDataset> datasets,
                      const ModelConfig& cfg, std::uint64_t seed) {
  schema.validate();
  cfg.validate();
  Federation fed;
  fed.schema = schema;
  const Eigen::Index H0 = cfg.global_hidden ? cfg.global_hidden : cfg.head_hidden;
  const Eigen::Index E = schema.embed_width;
  const Eigen::Index C = schema.num_classes;

  for (std::size_t d = 0; d < schema.num_blocks(); ++d) {
    auto rng = make_rng(seed, {0x657874ULL, d});
    std::vector<Eigen::Index> widths{schema.block_widths[d]};
    if (cfg.extractor_hidden > 0) widths.push_back(cfg.extractor_hidden);
    widths.push_back(E);
    fed.server.extractors.push_back(nn::make_mlp<double>(widths, nn::Activation::ReLU, cfg.embed_activation, rng));
  }

  fed.server.head = matching::make_global_head(schema.embedding_width(), H0, C);
  if (cfg.shared_head_init) {
    auto rng = make_rng(seed, {0x68656164ULL, 0xffffffffULL});
    const std::vector<Eigen::Index> widths{schema.embedding_width(), H0, C};
    fed.server.head.model = nn::make_mlp<double>(widths, nn::Activation::ReLU, nn::Activation::Softmax, rng);
    fed.server.head_ready = true;
  }
  fed.server.patterns.resize(datasets.size());

  for (std::size_t m = 0; m < datasets.size(); ++m) {
    if (datasets[m].client_id() != m) throw ConfigError("client datasets must be ordered by client id");
    ClientState c;
    c.data = std::make_shared<const data::ClientDataset>(std::move(datasets[m]));
    c.seed = make_rng(seed, {0x636c69ULL, m})();
    for (auto d : c.feature_set()) c.extractors.push_back(fed.server.extractors[d]);
    if (cfg.shared_head_init) {
      fed.server.patterns[m] = matching::MatchingPattern::identity(m, H0, H0);
      c.head = matching::pull_head(fed.server.head, *fed.server.patterns[m], c.feature_set(), schema);
    } else {
      auto rng = make_rng(seed, {0x68656164ULL, m});
      const std::vector<Eigen::Index> widths{static_cast<Eigen::Index>(c.feature_set().size()) * E, cfg.head_hidden,
                                             C};
      c.head = nn::make_mlp<double>(widths, nn::Activation::ReLU, nn::Activation::Softmax, rng);
    }
    fed.clients.push_back(std::move(c));
  }
  return fed;
}

ClientUpload make_upload(const ClientState& client, const data::FeatureSchema& schema) {
  return ClientUpload{client.id(), client.feature_set(), client.extractors,
                      matching::embed_local_head(client.head, client.feature_set(), schema)};
}

LocalAnchors anchors_for(const ServerState& server, const ClientState& client, const data::FeatureSchema& schema) {
  LocalAnchors a;
  for (auto d : client.feature_set()) a.extractors.push_back(server.extractors.at(d));
  const auto m = client.id();
  if (server.head_ready && m < server.patterns.size() && server.patterns[m])
    a.head = matching::pull_head(server.head, *server.patterns[m], client.feature_set(), schema);
  return a;
}

void distribute(ServerState& server, std::vector<ClientState>& clients, const data::FeatureSchema& schema) {
  for (auto& c : clients) {
    const auto m = c.id();
    if (m >= server.patterns.size()) server.patterns.resize(m + 1);
    if (!server.patterns[m])
      server.patterns[m] =
          matching::match_client(server.head, matching::embed_local_head(c.head, c.feature_set(), schema), m).pattern;
    c.head = matching::pull_head(server.head, *server.patterns[m], c.feature_set(), schema);
    for (std::size_t k = 0; k < c.feature_set().size(); ++k) c.extractors[k] = server.extractors.at(c.feature_set()[k]);
  }
}

namespace {

// Runs fn(i) for i in [0, n) on up to `workers` threads. Exceptions are
// rethrown on the calling thread.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t workers, Fn&& fn) {
  workers = std::min(workers, n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  pool.clear();
  if (error) std::rethrow_exception(error);
}

double mean(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

RoundMetrics run_round(Federation& fed, const RoundConfig& cfg, std::size_t round, std::span<const data::Sample> test,
                       std::uint64_t seed) {
  RoundMetrics metrics;
  metrics.round = round;
  metrics.lr = cfg.lr_at(round);
  metrics.mode = cfg.mode;
  metrics.mu = cfg.mu;

  const std::size_t M = fed.clients.size();
  std::vector<ClientState> updated(M);
  metrics.local_loss_per_client.assign(M, 0.0);
  metrics.local_acc_per_client.assign(M, 0.0);
  parallel_for(M, cfg.workers, [&](std::size_t m) {
    const auto& client = fed.clients[m];
    if (cfg.mode == LocalMode::Prox)
      updated[m] = local_update_prox(client, anchors_for(fed.server, client, fed.schema), cfg, metrics.lr, round);
    else
      updated[m] = local_update_avg(client, cfg, metrics.lr, round);
    metrics.local_loss_per_client[m] = data_loss(updated[m]);
    metrics.local_acc_per_client[m] = eval::eval_local(updated[m], test);
  });
  fed.clients = std::move(updated);
  metrics.mean_local_loss = mean(metrics.local_loss_per_client);
  metrics.mean_local_acc = mean(metrics.local_acc_per_client);

  std::vector<ClientUpload> uploads;
  uploads.reserve(M);
  for (const auto& c : fed.clients) uploads.push_back(make_upload(c, fed.schema));

  fed.server.extractors = aggregate_extractors(uploads, fed.schema.num_blocks());
  if (cfg.fixed_matching) {
    fixed_matching(fed.server, uploads);
  } else {
    metrics.matching = run_matching(fed.server, uploads, cfg.matching_passes, make_rng(seed, {0x726e64ULL, round})());
  }
  metrics.matching_objective = matching_objective(fed.server, uploads);

  metrics.global_acc = eval::eval_global(fed.server, test);
  metrics.global_loss = eval::global_loss(fed.server, test);

  distribute(fed.server, fed.clients, fed.schema);
  return metrics;
}

RunResult run(const RoundConfig& cfg, Federation fed, std::span<const data::Sample> test, std::uint64_t seed) {
  cfg.validate();
  RunResult result;
  for (std::size_t t = 0; t < cfg.rounds; ++t) result.trace.push_back(run_round(fed, cfg, t, test, seed));
  result.state = std::move(fed);
  return result;
}

std::string format_number(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string metrics_csv(std::span<const RoundMetrics> trace) {
  std::string out = kMetricsHeader;
  out += '\n';
  for (const auto& r : trace) {
    out += std::to_string(r.round) + ',' + format_number(r.lr) + ',' + to_string(r.mode) + ',' +
           format_number(r.mu) + ',' + format_number(r.mean_local_loss) + ',' + format_number(r.mean_local_acc) + ',' +
           format_number(r.global_loss) + ',' + format_number(r.global_acc) + ',' +
           format_number(r.matching_objective) + '\n';
  }
  return out;
}

std::string matching_trace_csv(std::span<const RoundMetrics> trace) {
  std::string out = "round,pass,client,assignment_cost,objective\n";
  for (const auto& r : trace)
    for (const auto& s : r.matching.steps)
      out += std::to_string(r.round) + ',' + std::to_string(s.pass) + ',' + std::to_string(s.client) + ',' +
             format_number(s.assignment_cost) + ',' + format_number(s.objective) + '\n';
  return out;
}

}  // namespace hyfem::federation
