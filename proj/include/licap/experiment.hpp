#pragma once

#include <cstddef>
#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "licap/downstream.hpp"
#include "licap/kg.hpp"
#include "licap/metrics.hpp"
#include "licap/pretrain.hpp"

namespace licap {

/// One column of a comparison: which embeddings feed the downstream head.
struct ArmSpec {
  std::string name;
  bool pretrain = true;  ///< false: the head sees the raw features
  PretrainConfig pretrain_config;
};

struct ExperimentSpec {
  std::vector<ArmSpec> arms;
  DownstreamConfig downstream;
  std::size_t folds = 5;
  std::uint64_t seed = 0;
  std::vector<std::size_t> ks{10, 50};
  std::size_t threads = 1;
};

struct FoldResult {
  std::string arm;
  std::size_t fold = 0;
  EvalReport report;
};

struct ExperimentReport {
  std::vector<std::string> arms;
  std::vector<std::size_t> ks;
  std::vector<FoldResult> results;  ///< arm-major, then fold

  std::vector<const FoldResult*> arm_results(const std::string& arm) const;
};

/// Seed for a fold, derived from the master seed by fold index.
std::uint64_t fold_seed(std::uint64_t master, std::size_t fold);

/// k-fold protocol. Per fold and arm: pretrain on the training-fold labels
/// (if the arm pretrains), fit the downstream head on the training fold and
/// score the held-out fold. Independent (arm, fold) jobs run on up to
/// `spec.threads` workers; results do not depend on the worker count.
ExperimentReport run_experiment(const KnowledgeGraph& kg, const FeatureMatrix& features,
                                const LabelSet& labels, const ExperimentSpec& spec);

/// `mean±std` with 4 decimals (population std).
std::string mean_std(std::span<const double> values);

/// Per-fold rows followed by one `mean` row per arm.
void write_report_csv(std::ostream& out, const ExperimentReport& report);
void write_report_table(std::ostream& out, const ExperimentReport& report);

}  // namespace licap
