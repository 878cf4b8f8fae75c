#include "hyfem/data.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <numeric>
#include <sstream>

#include "hyfem/errors.hpp"
#include "hyfem/random.hpp"

namespace hyfem::data {

namespace {

template <typename T>
std::string join(const std::vector<T>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(values[i]);
  }
  return out;
}

void append_double(std::string& out, double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, res.ptr);
}

}  // namespace

bool operator==(const Sample& a, const Sample& b) {
  if (a.id != b.id || a.label != b.label || a.blocks.size() != b.blocks.size()) return false;
  for (std::size_t i = 0; i < a.blocks.size(); ++i)
    if (a.blocks[i].size() != b.blocks[i].size() || a.blocks[i] != b.blocks[i]) return false;
  return true;
}

std::vector<Vector> select_blocks(const Sample& sample, std::span<const std::size_t> feature_set) {
  std::vector<Vector> out;
  out.reserve(feature_set.size());
  for (auto d : feature_set) {
    if (d >= sample.blocks.size()) throw StructuralError("feature index outside the sample's blocks");
    out.push_back(sample.blocks[d]);
  }
  return out;
}

ClientDataset::ClientDataset(std::size_t client_id, std::vector<std::size_t> feature_set,
                             std::span<const Sample> samples, std::span<const std::size_t> sample_indices)
    : client_id_(client_id), feature_set_(std::move(feature_set)) {
  if (feature_set_.empty()) throw ConfigError("client " + std::to_string(client_id) + " owns no feature blocks");
  if (sample_indices.empty()) throw ConfigError("client " + std::to_string(client_id) + " holds no samples");
  if (!std::is_sorted(feature_set_.begin(), feature_set_.end()) ||
      std::adjacent_find(feature_set_.begin(), feature_set_.end()) != feature_set_.end())
    throw ConfigError("client feature set must be sorted and duplicate-free");
  samples_.reserve(sample_indices.size());
  sample_ids_.reserve(sample_indices.size());
  for (auto idx : sample_indices) {
    const Sample& s = samples[idx];
    if (feature_set_.back() >= s.blocks.size()) throw ConfigError("client feature set exceeds sample blocks");
    samples_.push_back(LocalSample{s.id, select_blocks(s, feature_set_), s.label});
    sample_ids_.push_back(s.id);
  }
}

double PartitionPlan::unused_fraction() const {
  if (coverage.size() == 0) return 0.0;
  return static_cast<double>((coverage.array() == 0).count()) / static_cast<double>(coverage.size());
}

std::vector<std::size_t> PartitionPlan::block_owner_counts() const {
  std::size_t blocks = static_cast<std::size_t>(coverage.cols());
  std::vector<std::size_t> counts(blocks, 0);
  for (const auto& fs : feature_sets)
    for (auto d : fs) ++counts.at(d);
  return counts;
}

// ---------------------------------------------------------------------------
// Synthetic blobs

SyntheticTask make_synthetic_task(const FeatureSchema& schema, double separation, std::uint64_t seed) {
  schema.validate();
  if (!(separation > 0)) throw InputError("separation must be > 0");
  auto rng = make_rng(seed, {0x63656e74ULL});
  std::normal_distribution<double> normal(0.0, 1.0);
  SyntheticTask task{schema, {}};
  task.centers.resize(static_cast<std::size_t>(schema.num_classes));
  for (auto& per_class : task.centers) {
    per_class.reserve(schema.num_blocks());
    for (auto w : schema.block_widths) {
      Vector c(w);
      for (Eigen::Index i = 0; i < w; ++i) c(i) = separation * normal(rng);
      per_class.push_back(std::move(c));
    }
  }
  return task;
}

std::vector<Sample> sample_synthetic(const SyntheticTask& task, std::size_t n_per_class, std::uint64_t seed,
                                     std::int64_t first_id) {
  auto rng = make_rng(seed, {0x6e6f6973ULL});
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Sample> out;
  out.reserve(task.centers.size() * n_per_class);
  std::int64_t id = first_id;
  for (std::size_t c = 0; c < task.centers.size(); ++c) {
    for (std::size_t n = 0; n < n_per_class; ++n) {
      Sample s;
      s.id = id++;
      s.label = static_cast<Eigen::Index>(c);
      s.blocks.reserve(task.centers[c].size());
      for (const auto& center : task.centers[c]) {
        Vector x = center;
        for (Eigen::Index i = 0; i < x.size(); ++i) x(i) += normal(rng);
        s.blocks.push_back(std::move(x));
      }
      out.push_back(std::move(s));
    }
  }
  return out;
}

std::vector<Sample> gen_synthetic(const FeatureSchema& schema, std::size_t n_per_class, double separation,
                                  std::uint64_t seed) {
  return sample_synthetic(make_synthetic_task(schema, separation, seed), n_per_class, seed);
}

// ---------------------------------------------------------------------------
// Hybrid partition

Eigen::MatrixXi coverage_matrix(const std::vector<std::vector<Eigen::Index>>& class_sets,
                                const std::vector<std::vector<std::size_t>>& feature_sets, Eigen::Index num_classes,
                                std::size_t num_blocks) {
  Eigen::MatrixXi cov = Eigen::MatrixXi::Zero(num_classes, static_cast<Eigen::Index>(num_blocks));
  for (std::size_t m = 0; m < class_sets.size(); ++m)
    for (auto c : class_sets[m])
      for (auto d : feature_sets[m]) cov(c, static_cast<Eigen::Index>(d)) += 1;
  return cov;
}

namespace {

template <typename T>
std::vector<T> draw_subset(std::size_t universe, std::size_t k, std::mt19937_64& rng) {
  std::vector<T> all(universe);
  std::iota(all.begin(), all.end(), T{0});
  std::shuffle(all.begin(), all.end(), rng);
  all.resize(k);
  std::sort(all.begin(), all.end());
  return all;
}

constexpr int kMaxPartitionAttempts = 1000;

}  // namespace

Partition partition_hybrid(std::span<const Sample> samples, const FeatureSchema& schema, std::size_t num_clients,
                           std::size_t classes_per_client, std::size_t views_per_client, std::uint64_t seed) {
  schema.validate();
  const auto C = static_cast<std::size_t>(schema.num_classes);
  const auto D = schema.num_blocks();
  if (num_clients < 1) throw ConfigError("partition.clients", "need at least one client");
  if (classes_per_client < 1 || classes_per_client > C)
    throw ConfigError("partition.classes_per_client", "must lie in [1, num_classes]");
  if (views_per_client < 1 || views_per_client > D)
    throw ConfigError("partition.views_per_client", "must lie in [1, num_blocks]");

  PartitionPlan plan;
  bool covered = false;
  for (int attempt = 0; attempt < kMaxPartitionAttempts && !covered; ++attempt) {
    auto rng = make_rng(seed, {0x70617274ULL, static_cast<std::uint64_t>(attempt)});
    plan.class_sets.clear();
    plan.feature_sets.clear();
    for (std::size_t m = 0; m < num_clients; ++m) {
      plan.class_sets.push_back(draw_subset<Eigen::Index>(C, classes_per_client, rng));
      plan.feature_sets.push_back(draw_subset<std::size_t>(D, views_per_client, rng));
    }
    std::vector<bool> owned(D, false);
    for (const auto& fs : plan.feature_sets)
      for (auto d : fs) owned[d] = true;
    covered = std::all_of(owned.begin(), owned.end(), [](bool b) { return b; });
  }
  if (!covered) throw ConfigError("partition", "some feature block has no owner after repeated resampling");
  plan.coverage = coverage_matrix(plan.class_sets, plan.feature_sets, schema.num_classes, D);

  // Samples of each class are split evenly and disjointly among its owners.
  std::vector<std::vector<std::size_t>> by_class(C);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto label = samples[i].label;
    if (label < 0 || static_cast<std::size_t>(label) >= C) throw InputError("sample label outside class range");
    if (samples[i].blocks.size() != D) throw SchemaError("sample block count does not match schema");
    by_class[static_cast<std::size_t>(label)].push_back(i);
  }
  std::vector<std::vector<std::size_t>> assigned(num_clients);
  for (std::size_t c = 0; c < C; ++c) {
    std::vector<std::size_t> owners;
    for (std::size_t m = 0; m < num_clients; ++m)
      if (std::binary_search(plan.class_sets[m].begin(), plan.class_sets[m].end(), static_cast<Eigen::Index>(c)))
        owners.push_back(m);
    const std::size_t n = by_class[c].size();
    const std::size_t k = owners.size();
    for (std::size_t j = 0; j < k; ++j)
      for (std::size_t i = j * n / k; i < (j + 1) * n / k; ++i) assigned[owners[j]].push_back(by_class[c][i]);
  }

  Partition out;
  out.clients.reserve(num_clients);
  for (std::size_t m = 0; m < num_clients; ++m) {
    std::sort(assigned[m].begin(), assigned[m].end());
    out.clients.emplace_back(m, plan.feature_sets[m], samples, assigned[m]);
  }
  out.plan = std::move(plan);
  return out;
}

// ---------------------------------------------------------------------------
// CSV

std::vector<Sample> parse_csv(const std::string& text, const FeatureSchema& schema) {
  schema.validate();
  const Eigen::Index width = schema.total_width();
  std::vector<Sample> out;
  std::istringstream in(text);
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;

    std::vector<double> values;
    const char* p = line.data();
    const char* end = line.data() + line.size();
    while (true) {
      while (p < end && (*p == ' ' || *p == '\t')) ++p;
      double v = 0;
      auto res = std::from_chars(p, end, v);
      if (res.ec != std::errc{}) throw ParseError("malformed number", row);
      values.push_back(v);
      p = res.ptr;
      while (p < end && (*p == ' ' || *p == '\t')) ++p;
      if (p == end) break;
      if (*p != ',') throw ParseError("unexpected character '" + std::string(1, *p) + "'", row);
      ++p;
    }
    if (static_cast<Eigen::Index>(values.size()) != width + 1)
      throw SchemaError("row " + std::to_string(row) + ": expected " + std::to_string(width + 1) + " columns, got " +
                        std::to_string(values.size()));
    const double label = values.back();
    if (label != std::floor(label) || label < 0 || label >= static_cast<double>(schema.num_classes))
      throw ParseError("label is not a class index", row);

    Sample s;
    s.id = static_cast<std::int64_t>(out.size());
    s.label = static_cast<Eigen::Index>(label);
    std::size_t k = 0;
    for (auto w : schema.block_widths) {
      Vector b(w);
      for (Eigen::Index i = 0; i < w; ++i) b(i) = values[k++];
      s.blocks.push_back(std::move(b));
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<Sample> load_csv(const std::filesystem::path& path, const FeatureSchema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_csv(buf.str(), schema);
}

std::string format_csv(std::span<const Sample> samples) {
  std::string out;
  for (const auto& s : samples) {
    for (const auto& b : s.blocks)
      for (Eigen::Index i = 0; i < b.size(); ++i) {
        append_double(out, b(i));
        out += ',';
      }
    out += std::to_string(s.label);
    out += '\n';
  }
  return out;
}

void save_csv(const std::filesystem::path& path, std::span<const Sample> samples) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out << format_csv(samples);
}

std::string describe(const FeatureSchema& schema, const PartitionPlan& plan) {
  std::ostringstream out;
  out << "schema.num_blocks=" << schema.num_blocks() << '\n';
  out << "schema.block_widths=" << join(schema.block_widths) << '\n';
  out << "schema.embed_width=" << schema.embed_width << '\n';
  out << "schema.num_classes=" << schema.num_classes << '\n';
  out << "partition.clients=" << plan.num_clients() << '\n';
  for (std::size_t m = 0; m < plan.num_clients(); ++m) {
    out << "client." << m << ".classes=" << join(plan.class_sets[m]) << '\n';
    out << "client." << m << ".views=" << join(plan.feature_sets[m]) << '\n';
  }
  for (Eigen::Index c = 0; c < plan.coverage.rows(); ++c) {
    std::vector<int> row(plan.coverage.cols());
    for (Eigen::Index d = 0; d < plan.coverage.cols(); ++d) row[d] = plan.coverage(c, d);
    out << "coverage.class." << c << '=' << join(row) << '\n';
  }
  std::string frac;
  append_double(frac, plan.unused_fraction());
  out << "coverage.unused_fraction=" << frac << '\n';
  return out.str();
}

}  // namespace hyfem::data
