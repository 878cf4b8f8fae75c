#include "hyfem/experiment.hpp"

#include <fstream>

#include "hyfem/errors.hpp"
#include "hyfem/eval.hpp"
#include "hyfem/random.hpp"

namespace hyfem::experiment {

namespace fs = std::filesystem;

Dataset build_dataset(const config::RunSpec& spec) {
  Dataset ds;
  ds.schema = spec.data.schema();
  if (!spec.data.train_csv.empty()) {
    ds.train = data::load_csv(spec.data.train_csv, ds.schema);
    ds.test = data::load_csv(spec.data.test_csv, ds.schema);
    for (std::size_t i = 0; i < ds.test.size(); ++i) ds.test[i].id = static_cast<std::int64_t>(ds.train.size() + i);
    return ds;
  }
  const auto seed = spec.data_seed();
  const auto task = data::make_synthetic_task(ds.schema, spec.data.separation, seed);
  ds.train = data::sample_synthetic(task, spec.data.n_per_class, seed);
  ds.test = data::sample_synthetic(task, spec.data.n_test_per_class, make_rng(seed, {0x74657374ULL})(),
                                   static_cast<std::int64_t>(ds.train.size()));
  return ds;
}

Outcome execute(const config::RunSpec& spec, const Dataset& dataset, double mu) {
  auto partition = data::partition_hybrid(dataset.train, dataset.schema, spec.partition.clients,
                                          spec.partition.classes_per_client, spec.partition.views_per_client,
                                          make_rng(spec.seed, {0x70617274ULL})());
  Outcome out;
  out.mu = mu;
  out.plan = partition.plan;
  auto fed = federation::initialize(dataset.schema, std::move(partition.clients), spec.model, spec.seed);
  auto cfg = spec.rounds;
  cfg.mu = mu;
  out.result = federation::run(cfg, std::move(fed), dataset.test, spec.seed);
  return out;
}

namespace {

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out << text;
}

std::string summary(const config::RunSpec& spec, const Outcome& o) {
  std::string s = "scenario=" + spec.scenario + '\n';
  s += "mode=" + federation::to_string(spec.rounds.mode) + '\n';
  s += "mu=" + federation::format_number(o.mu) + '\n';
  s += "rounds=" + std::to_string(o.result.trace.size()) + '\n';
  s += "unused_cell_fraction=" + federation::format_number(o.plan.unused_fraction()) + '\n';
  if (!o.result.trace.empty()) {
    const auto& last = o.result.trace.back();
    const auto report = eval::make_report(last.round, last.local_acc_per_client, last.global_acc, last.global_loss,
                                          last.mean_local_loss);
    s += eval::summary_text(report);
    s += "matching_objective=" + federation::format_number(last.matching_objective) + '\n';
  }
  return s;
}

void write_outputs(const fs::path& dir, const config::RunSpec& spec, const data::FeatureSchema& schema,
                   const Outcome& o) {
  fs::create_directories(dir);
  write_file(dir / "metrics.csv", federation::metrics_csv(o.result.trace));
  write_file(dir / "matching_trace.csv", federation::matching_trace_csv(o.result.trace));
  write_file(dir / "partition.txt", data::describe(schema, o.plan));
  write_file(dir / "summary.txt", summary(spec, o));
}

}  // namespace

std::vector<Outcome> run_experiment(const config::RunSpec& spec) {
  config::validate(spec);
  const Dataset dataset = build_dataset(spec);
  const fs::path root(spec.out);

  std::vector<Outcome> outcomes;
  if (spec.mu_sweep.empty()) {
    outcomes.push_back(execute(spec, dataset, spec.rounds.mu));
  } else {
    for (double mu : spec.mu_sweep) outcomes.push_back(execute(spec, dataset, mu));
  }

  fs::create_directories(root);
  write_file(root / "config.txt", config::to_config_text(spec));
  if (spec.mu_sweep.empty()) {
    write_outputs(root, spec, dataset.schema, outcomes.front());
  } else {
    std::string sweep = "mu,mean_local_acc,global_acc\n";
    for (const auto& o : outcomes) {
      write_outputs(root / ("mu_" + federation::format_number(o.mu)), spec, dataset.schema, o);
      if (o.result.trace.empty()) continue;
      const auto& last = o.result.trace.back();
      sweep += federation::format_number(o.mu) + ',' + federation::format_number(last.mean_local_acc) + ',' +
               federation::format_number(last.global_acc) + '\n';
    }
    write_file(root / "sweep.csv", sweep);
  }
  return outcomes;
}

}  // namespace hyfem::experiment
