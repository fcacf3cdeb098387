#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace licap {

/// sqrt(mean((pred - truth)^2)).
double rmse(std::span<const double> pred, std::span<const double> truth);

/// Median absolute error; even counts average the two middle values.
double median_ae(std::span<const double> pred, std::span<const double> truth);

/// DCG@k / IDCG@k with graded relevance equal to the truth score. Items are
/// ranked by descending prediction, ties by ascending index. 0 when IDCG is 0.
double ndcg_at_k(std::span<const double> pred, std::span<const double> truth, std::size_t k);

/// Pearson correlation of fractional (tie-averaged) ranks.
double spearman(std::span<const double> pred, std::span<const double> truth);

/// |top-k(pred) intersect top-k(truth)| / k, ties by ascending index.
double over_at_k(std::span<const double> pred, std::span<const double> truth, std::size_t k);

/// Indices sorted by descending value, ties by ascending index.
std::vector<std::size_t> rank_order(std::span<const double> values);

/// 1-based fractional ranks in ascending value order.
std::vector<double> fractional_ranks(std::span<const double> values);

/// Seeded shuffle of [0, n) cut into k contiguous folds whose sizes differ by
/// at most one.
std::vector<std::vector<std::size_t>> kfold_split(std::size_t n, std::size_t k, std::uint64_t seed);

struct EvalReport {
  std::size_t fold = 0;
  std::size_t samples = 0;
  double rmse = 0.0;
  double median_ae = 0.0;
  double spearman = 0.0;
  std::vector<std::size_t> ks;
  std::vector<double> ndcg_at_k;  ///< aligned with ks
  std::vector<double> over_at_k;  ///< aligned with ks
};

EvalReport evaluate(std::span<const double> pred, std::span<const double> truth,
                    std::span<const std::size_t> ks);

/// Column names matching `report_values`.
std::vector<std::string> report_columns(std::span<const std::size_t> ks);
std::vector<double> report_values(const EvalReport& report);

}  // namespace licap
