#include "licap/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <iomanip>
#include <mutex>
#include <thread>

#include "licap/error.hpp"

namespace licap {

namespace {

struct Job {
  std::size_t arm = 0;
  std::size_t fold = 0;
};

FoldResult run_job(const KnowledgeGraph& kg, const MessageGraph& graph, const FeatureMatrix& features,
                   const LabelSet& labels, const ExperimentSpec& spec,
                   const std::vector<std::vector<std::size_t>>& folds, const Job& job) {
  const auto& arm = spec.arms[job.arm];
  const auto all = labels.nodes();
  std::vector<bool> held_out(all.size(), false);
  for (const auto i : folds[job.fold]) held_out[i] = true;
  std::vector<NodeId> train_nodes;
  std::vector<NodeId> test_nodes;
  for (std::size_t i = 0; i < all.size(); ++i) (held_out[i] ? test_nodes : train_nodes).push_back(all[i]);
  const LabelSet train = labels.subset(train_nodes);

  const std::uint64_t seed = fold_seed(spec.seed, job.fold);
  Matrix embeddings = features;
  if (arm.pretrain) {
    PretrainConfig cfg = arm.pretrain_config;
    cfg.seed = seed;
    embeddings = pretrain(kg, features, train, cfg).embeddings;
  }
  DownstreamConfig down = spec.downstream;
  down.seed = seed;
  const NieModel model = down.kind == NieKind::mlp
                             ? train_mlp(embeddings, train, down)
                             : train_aggregated_scorer(graph, embeddings, train, down);
  const auto pred = predict(model, embeddings, test_nodes, &graph);
  std::vector<double> truth;
  for (const NodeId n : test_nodes) truth.push_back(labels.score(n));
  FoldResult result{arm.name, job.fold, evaluate(pred, truth, spec.ks)};
  result.report.fold = job.fold;
  return result;
}

std::vector<std::vector<double>> columns_of(const std::vector<const FoldResult*>& rows) {
  std::vector<std::vector<double>> cols;
  for (const auto* r : rows) {
    const auto v = report_values(r->report);
    if (cols.empty()) cols.resize(v.size());
    for (std::size_t c = 0; c < v.size(); ++c) cols[c].push_back(v[c]);
  }
  return cols;
}

}  // namespace

std::vector<const FoldResult*> ExperimentReport::arm_results(const std::string& arm) const {
  std::vector<const FoldResult*> out;
  for (const auto& r : results)
    if (r.arm == arm) out.push_back(&r);
  return out;
}

std::uint64_t fold_seed(std::uint64_t master, std::size_t fold) {
  // splitmix64 finalizer
  std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(fold) + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

ExperimentReport run_experiment(const KnowledgeGraph& kg, const FeatureMatrix& features,
                                const LabelSet& labels, const ExperimentSpec& spec) {
  if (spec.arms.empty()) throw Error("experiment needs at least one arm");
  const KnowledgeGraph augmented = kg.augmented() ? kg : augment_for_message_passing(kg);
  const MessageGraph graph = message_graph(augmented);
  const auto folds = kfold_split(labels.size(), spec.folds, spec.seed);
  for (const auto& f : folds)
    for (const auto k : spec.ks)
      if (k > f.size())
        throw Error("k = " + std::to_string(k) + " exceeds the held-out fold size " + std::to_string(f.size()));

  std::vector<Job> jobs;
  for (std::size_t a = 0; a < spec.arms.size(); ++a)
    for (std::size_t f = 0; f < folds.size(); ++f) jobs.push_back({a, f});

  std::vector<FoldResult> results(jobs.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_lock;
  auto worker = [&] {
    for (std::size_t j = next++; j < jobs.size(); j = next++) {
      try {
        results[j] = run_job(augmented, graph, features, labels, spec, folds, jobs[j]);
      } catch (...) {
        std::lock_guard lock(failure_lock);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const auto workers = std::clamp<std::size_t>(spec.threads, 1, jobs.size());
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < workers; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  ExperimentReport report;
  for (const auto& arm : spec.arms) report.arms.push_back(arm.name);
  report.ks = spec.ks;
  report.results = std::move(results);
  return report;
}

std::string mean_std(std::span<const double> values) {
  if (values.empty()) throw Error("mean_std of no values");
  double mean = 0.0;
  for (const double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (const double v : values) var += (v - mean) * (v - mean);
  var /= static_cast<double>(values.size());
  char buf[96];
  std::snprintf(buf, sizeof(buf), "%.4f±%.4f", mean, std::sqrt(var));
  return buf;
}

void write_report_csv(std::ostream& out, const ExperimentReport& report) {
  const auto names = report_columns(report.ks);
  out << "arm,fold";
  for (const auto& n : names) out << ',' << n;
  out << '\n';
  for (const auto& r : report.results) {
    out << r.arm << ',' << r.fold;
    char buf[32];
    for (const double v : report_values(r.report)) {
      std::snprintf(buf, sizeof(buf), "%.6f", v);
      out << ',' << buf;
    }
    out << '\n';
  }
  for (const auto& arm : report.arms) {
    out << arm << ",mean";
    for (const auto& col : columns_of(report.arm_results(arm))) out << ',' << mean_std(col);
    out << '\n';
  }
}

void write_report_table(std::ostream& out, const ExperimentReport& report) {
  const auto names = report_columns(report.ks);
  std::size_t arm_width = 6;
  for (const auto& a : report.arms) arm_width = std::max(arm_width, a.size() + 2);
  out << std::left << std::setw(static_cast<int>(arm_width)) << "arm";
  for (const auto& n : names) out << std::setw(18) << n;
  out << '\n';
  for (const auto& arm : report.arms) {
    out << std::setw(static_cast<int>(arm_width)) << arm;
    // "±" is two bytes in UTF-8; pad by display width.
    for (const auto& col : columns_of(report.arm_results(arm))) out << std::setw(19) << mean_std(col);
    out << '\n';
  }
}

}  // namespace licap
