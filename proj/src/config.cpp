#include "hyfem/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <thread>

#include "hyfem/errors.hpp"
#include "hyfem/orchestrator.hpp"

namespace hyfem::config {

data::FeatureSchema DataSpec::schema() const {
  return data::FeatureSchema::uniform(num_blocks, block_width, embed_width, num_classes);
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_integer(const std::string& key, const std::string& text) {
  T v{};
  const auto t = trim(text);
  auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (res.ec != std::errc{} || res.ptr != t.data() + t.size() || t.empty())
    throw ConfigError(key, "expected an integer, got '" + text + "'");
  return v;
}

double parse_real(const std::string& key, const std::string& text) {
  double v = 0;
  const auto t = trim(text);
  auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (res.ec != std::errc{} || res.ptr != t.data() + t.size() || t.empty())
    throw ConfigError(key, "expected a number, got '" + text + "'");
  return v;
}

bool parse_bool(const std::string& key, const std::string& text) {
  const auto t = trim(text);
  if (t == "true" || t == "1") return true;
  if (t == "false" || t == "0") return false;
  throw ConfigError(key, "expected true or false, got '" + text + "'");
}

std::vector<double> parse_real_list(const std::string& key, const std::string& text) {
  std::vector<double> out;
  if (trim(text).empty()) return out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_real(key, item));
  return out;
}

nn::Activation parse_activation(const std::string& key, const std::string& text) {
  const auto t = trim(text);
  if (t == "relu") return nn::Activation::ReLU;
  if (t == "identity") return nn::Activation::Identity;
  throw ConfigError(key, "expected relu or identity, got '" + text + "'");
}

using federation::format_number;

struct KeyHandler {
  std::function<void(RunSpec&, const std::string& key, const std::string&)> set;
  std::function<std::string(const RunSpec&)> get;
};

#define HYFEM_INT_KEY(expr, type)                                                                  \
  KeyHandler {                                                                                     \
    [](RunSpec& s, const std::string& k, const std::string& v) { s.expr = parse_integer<type>(k, v); }, \
        [](const RunSpec& s) { return std::to_string(s.expr); }                                    \
  }
#define HYFEM_REAL_KEY(expr)                                                                       \
  KeyHandler {                                                                                     \
    [](RunSpec& s, const std::string& k, const std::string& v) { s.expr = parse_real(k, v); },     \
        [](const RunSpec& s) { return format_number(s.expr); }                                     \
  }
#define HYFEM_STRING_KEY(expr)                                                                     \
  KeyHandler {                                                                                     \
    [](RunSpec& s, const std::string&, const std::string& v) { s.expr = trim(v); },                \
        [](const RunSpec& s) { return s.expr; }                                                    \
  }
#define HYFEM_BOOL_KEY(expr)                                                                       \
  KeyHandler {                                                                                     \
    [](RunSpec& s, const std::string& k, const std::string& v) { s.expr = parse_bool(k, v); },     \
        [](const RunSpec& s) { return std::string(s.expr ? "true" : "false"); }                    \
  }

const std::map<std::string, KeyHandler>& key_table() {
  static const std::map<std::string, KeyHandler> table = {
      {"scenario", HYFEM_STRING_KEY(scenario)},
      {"data.num_blocks", HYFEM_INT_KEY(data.num_blocks, Eigen::Index)},
      {"data.block_width", HYFEM_INT_KEY(data.block_width, Eigen::Index)},
      {"data.embed_width", HYFEM_INT_KEY(data.embed_width, Eigen::Index)},
      {"data.num_classes", HYFEM_INT_KEY(data.num_classes, Eigen::Index)},
      {"data.n_per_class", HYFEM_INT_KEY(data.n_per_class, std::size_t)},
      {"data.n_test_per_class", HYFEM_INT_KEY(data.n_test_per_class, std::size_t)},
      {"data.separation", HYFEM_REAL_KEY(data.separation)},
      {"data.seed", HYFEM_INT_KEY(data.seed, std::uint64_t)},
      {"data.train_csv", HYFEM_STRING_KEY(data.train_csv)},
      {"data.test_csv", HYFEM_STRING_KEY(data.test_csv)},
      {"partition.clients", HYFEM_INT_KEY(partition.clients, std::size_t)},
      {"partition.classes_per_client", HYFEM_INT_KEY(partition.classes_per_client, std::size_t)},
      {"partition.views_per_client", HYFEM_INT_KEY(partition.views_per_client, std::size_t)},
      {"model.extractor_hidden", HYFEM_INT_KEY(model.extractor_hidden, Eigen::Index)},
      {"model.head_hidden", HYFEM_INT_KEY(model.head_hidden, Eigen::Index)},
      {"model.global_hidden", HYFEM_INT_KEY(model.global_hidden, Eigen::Index)},
      {"model.embed_activation",
       KeyHandler{[](RunSpec& s, const std::string& k,
                     const std::string& v) { s.model.embed_activation = parse_activation(k, v); },
                  [](const RunSpec& s) { return nn::to_string(s.model.embed_activation); }}},
      {"model.shared_head_init", HYFEM_BOOL_KEY(model.shared_head_init)},
      {"rounds.T", HYFEM_INT_KEY(rounds.rounds, std::size_t)},
      {"rounds.Q", HYFEM_INT_KEY(rounds.local_steps, std::size_t)},
      {"rounds.P", HYFEM_INT_KEY(rounds.matching_passes, std::size_t)},
      {"rounds.batch_size", HYFEM_INT_KEY(rounds.batch_size, std::size_t)},
      {"rounds.fixed_matching", HYFEM_BOOL_KEY(rounds.fixed_matching)},
      {"lr.initial", HYFEM_REAL_KEY(rounds.lr)},
      {"lr.decay", HYFEM_REAL_KEY(rounds.lr_decay)},
      {"lr.period", HYFEM_INT_KEY(rounds.lr_period, std::size_t)},
      {"reg.mu", HYFEM_REAL_KEY(rounds.mu)},
      {"reg.lambda_feat", HYFEM_REAL_KEY(rounds.lambda_feat)},
      {"reg.mode",
       KeyHandler{[](RunSpec& s, const std::string&, const std::string& v) {
                    s.rounds.mode = federation::parse_mode(trim(v));
                  },
                  [](const RunSpec& s) { return federation::to_string(s.rounds.mode); }}},
      {"sweep.mu",
       KeyHandler{[](RunSpec& s, const std::string& k, const std::string& v) { s.mu_sweep = parse_real_list(k, v); },
                  [](const RunSpec& s) {
                    std::string out;
                    for (std::size_t i = 0; i < s.mu_sweep.size(); ++i) {
                      if (i) out += ',';
                      out += format_number(s.mu_sweep[i]);
                    }
                    return out;
                  }}},
      {"run.workers", HYFEM_INT_KEY(rounds.workers, std::size_t)},
      {"seed", HYFEM_INT_KEY(seed, std::uint64_t)},
      {"out", HYFEM_STRING_KEY(out)},
  };
  return table;
}

#undef HYFEM_INT_KEY
#undef HYFEM_REAL_KEY
#undef HYFEM_STRING_KEY
#undef HYFEM_BOOL_KEY

// key -> value in file order; duplicate keys: last one wins.
std::vector<std::pair<std::string, std::string>> parse_lines(const std::string& text) {
  std::vector<std::pair<std::string, std::string>> out;
  std::istringstream in(text);
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(row), "expected key = value");
    out.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return out;
}

std::size_t default_workers(std::size_t clients) {
  const std::size_t hw = std::max(1u, std::thread::hardware_concurrency());
  return std::max<std::size_t>(1, std::min(clients, hw));
}

}  // namespace

std::vector<std::string> scenario_names() { return {"paper-4x3", "paper-8x6", "quick", "custom"}; }

RunSpec scenario_defaults(const std::string& name) {
  RunSpec s;
  s.scenario = name;
  s.rounds.rounds = 32;
  s.rounds.local_steps = 32;
  s.rounds.batch_size = 32;
  s.rounds.lr = 0.005;
  s.rounds.lr_decay = 0.2;
  s.rounds.lr_period = 8;
  s.rounds.mu = 0.1;
  s.rounds.mode = federation::LocalMode::Prox;
  if (name == "paper-4x3") {
    s.data.num_blocks = 4;
    s.data.block_width = 8;
    s.data.num_classes = 8;
    s.data.separation = 6.0;
    s.partition = {4, 6, 3};
  } else if (name == "paper-8x6") {
    s.data.num_blocks = 12;
    s.data.num_classes = 16;
    s.data.separation = 6.0;
    s.partition = {8, 6, 6};
    s.mu_sweep = {0.1, 0.5};
  } else if (name == "quick") {
    s.data.num_blocks = 3;
    s.data.num_classes = 4;
    s.data.n_per_class = 32;
    s.data.n_test_per_class = 16;
    s.partition = {3, 3, 2};
    s.rounds.rounds = 4;
    s.rounds.local_steps = 8;
    s.rounds.batch_size = 16;
    s.rounds.lr = 0.02;
    s.rounds.lr_period = 2;
    s.model.head_hidden = 16;
  } else if (name == "custom") {
    // generic defaults from the struct initialisers
  } else {
    throw ConfigError("scenario", "unknown scenario '" + name + "'");
  }
  s.rounds.matching_passes = 2 * s.partition.clients;
  s.rounds.workers = default_workers(s.partition.clients);
  return s;
}

void apply_key(RunSpec& spec, const std::string& key, const std::string& value) {
  const auto& table = key_table();
  const auto it = table.find(key);
  if (it == table.end()) throw ConfigError(key, "unknown key");
  it->second.set(spec, key, value);
}

RunSpec parse_config(const std::optional<std::string>& file_text, const Overrides& flags,
                     const std::optional<std::string>& default_out) {
  std::vector<std::pair<std::string, std::string>> entries;
  if (file_text) entries = parse_lines(*file_text);

  const auto& table = key_table();
  for (const auto& [k, v] : entries)
    if (!table.count(k)) throw ConfigError(k, "unknown key");

  std::optional<std::string> scenario = flags.scenario;
  if (!scenario)
    for (const auto& [k, v] : entries)
      if (k == "scenario") scenario = v;
  if (!scenario || scenario->empty()) throw ConfigError("scenario", "a scenario name is required");

  RunSpec spec = scenario_defaults(*scenario);
  spec.out = default_out.value_or("hyfem_out");
  bool workers_set = false, passes_set = false;
  for (const auto& [k, v] : entries) {
    if (k == "scenario") continue;
    apply_key(spec, k, v);
    workers_set |= k == "run.workers";
    passes_set |= k == "rounds.P";
  }
  if (!workers_set) spec.rounds.workers = default_workers(spec.partition.clients);
  if (!passes_set) spec.rounds.matching_passes = 2 * spec.partition.clients;

  if (flags.mu) {
    spec.rounds.mu = *flags.mu;
    spec.mu_sweep.clear();
  }
  if (flags.mode) spec.rounds.mode = federation::parse_mode(*flags.mode);
  if (flags.seed) spec.seed = *flags.seed;
  if (flags.rounds) spec.rounds.rounds = *flags.rounds;
  if (flags.out) spec.out = *flags.out;
  if (flags.workers) spec.rounds.workers = *flags.workers;
  validate(spec);
  return spec;
}

RunSpec load_config(const std::optional<std::string>& path, const Overrides& flags) {
  std::optional<std::string> text;
  if (path) {
    std::ifstream in(*path);
    if (!in) throw ConfigError("--config", "cannot read " + *path);
    std::ostringstream buf;
    buf << in.rdbuf();
    text = buf.str();
  }
  std::optional<std::string> env_out;
  if (const char* env = std::getenv("HYFEM_OUT"); env && *env) env_out = env;
  return parse_config(text, flags, env_out);
}

void validate(const RunSpec& spec) {
  scenario_defaults(spec.scenario);
  try {
    spec.data.schema();
  } catch (const SchemaError& e) {
    throw ConfigError("data", e.what());
  }
  if (spec.data.train_csv.empty()) {
    if (spec.data.n_per_class < 1) throw ConfigError("data.n_per_class", "must be >= 1");
    if (!(spec.data.separation > 0)) throw ConfigError("data.separation", "must be > 0");
  } else if (spec.data.test_csv.empty()) {
    throw ConfigError("data.test_csv", "required when data.train_csv is set");
  }
  const auto& p = spec.partition;
  if (p.clients < 1) throw ConfigError("partition.clients", "must be >= 1");
  if (p.classes_per_client < 1 || p.classes_per_client > static_cast<std::size_t>(spec.data.num_classes))
    throw ConfigError("partition.classes_per_client", "must lie in [1, data.num_classes]");
  if (p.views_per_client < 1 || p.views_per_client > static_cast<std::size_t>(spec.data.num_blocks))
    throw ConfigError("partition.views_per_client", "must lie in [1, data.num_blocks]");
  spec.model.validate();
  spec.rounds.validate();
  for (double mu : spec.mu_sweep)
    if (!(mu >= 0) || !std::isfinite(mu)) throw ConfigError("sweep.mu", "entries must be finite and >= 0");
  if (spec.out.empty()) throw ConfigError("out", "output directory must not be empty");
}

std::string to_config_text(const RunSpec& spec) {
  std::string out;
  for (const auto& [key, handler] : key_table()) out += key + " = " + handler.get(spec) + '\n';
  return out;
}

}  // namespace hyfem::config
