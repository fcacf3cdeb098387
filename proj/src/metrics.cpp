#include "licap/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "licap/error.hpp"

namespace licap {

namespace {

void check_pair(std::span<const double> pred, std::span<const double> truth, const char* metric) {
  if (pred.size() != truth.size())
    throw Error(std::string(metric) + ": " + std::to_string(pred.size()) + " predictions for " +
                std::to_string(truth.size()) + " labels");
  if (pred.empty()) throw Error(std::string(metric) + ": no samples");
}

void check_k(std::size_t k, std::size_t n, const char* metric) {
  if (k < 1 || k > n)
    throw Error(std::string(metric) + ": k = " + std::to_string(k) + " outside [1, " +
                std::to_string(n) + "]");
}

double dcg(std::span<const double> truth, std::span<const std::size_t> order, std::size_t k) {
  double total = 0.0;
  for (std::size_t r = 0; r < k; ++r) total += truth[order[r]] / std::log2(static_cast<double>(r) + 2.0);
  return total;
}

}  // namespace

double rmse(std::span<const double> pred, std::span<const double> truth) {
  check_pair(pred, truth, "rmse");
  double total = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) total += (pred[i] - truth[i]) * (pred[i] - truth[i]);
  return std::sqrt(total / static_cast<double>(pred.size()));
}

double median_ae(std::span<const double> pred, std::span<const double> truth) {
  check_pair(pred, truth, "median_ae");
  std::vector<double> err(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) err[i] = std::abs(pred[i] - truth[i]);
  std::sort(err.begin(), err.end());
  const auto n = err.size();
  return n % 2 == 1 ? err[n / 2] : 0.5 * (err[n / 2 - 1] + err[n / 2]);
}

std::vector<std::size_t> rank_order(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
  return order;
}

std::vector<double> fractional_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = avg;
    i = j + 1;
  }
  return ranks;
}

double ndcg_at_k(std::span<const double> pred, std::span<const double> truth, std::size_t k) {
  check_pair(pred, truth, "ndcg_at_k");
  check_k(k, pred.size(), "ndcg_at_k");
  for (const double t : truth)
    if (t < 0.0) throw Error("ndcg_at_k: relevance scores must be nonnegative");
  const double ideal = dcg(truth, rank_order(truth), k);
  if (ideal == 0.0) return 0.0;
  return dcg(truth, rank_order(pred), k) / ideal;
}

double spearman(std::span<const double> pred, std::span<const double> truth) {
  check_pair(pred, truth, "spearman");
  if (pred.size() < 2) throw Error("spearman: need at least 2 samples");
  const auto rp = fractional_ranks(pred);
  const auto rt = fractional_ranks(truth);
  const double n = static_cast<double>(rp.size());
  const double mp = std::accumulate(rp.begin(), rp.end(), 0.0) / n;
  const double mt = std::accumulate(rt.begin(), rt.end(), 0.0) / n;
  double cov = 0.0, vp = 0.0, vt = 0.0;
  for (std::size_t i = 0; i < rp.size(); ++i) {
    cov += (rp[i] - mp) * (rt[i] - mt);
    vp += (rp[i] - mp) * (rp[i] - mp);
    vt += (rt[i] - mt) * (rt[i] - mt);
  }
  if (vp == 0.0 || vt == 0.0) throw Error("spearman: undefined for a constant input");
  return cov / (std::sqrt(vp) * std::sqrt(vt));
}

double over_at_k(std::span<const double> pred, std::span<const double> truth, std::size_t k) {
  check_pair(pred, truth, "over_at_k");
  check_k(k, pred.size(), "over_at_k");
  const auto op = rank_order(pred);
  const auto ot = rank_order(truth);
  std::vector<bool> in_truth(pred.size(), false);
  for (std::size_t r = 0; r < k; ++r) in_truth[ot[r]] = true;
  std::size_t shared = 0;
  for (std::size_t r = 0; r < k; ++r) shared += in_truth[op[r]] ? 1 : 0;
  return static_cast<double>(shared) / static_cast<double>(k);
}

std::vector<std::vector<std::size_t>> kfold_split(std::size_t n, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw Error("kfold_split: need at least 2 folds");
  if (k > n) throw Error("kfold_split: " + std::to_string(k) + " folds for " + std::to_string(n) + " items");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  for (std::size_t i = n; i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(idx[i - 1], idx[pick(rng)]);
  }
  std::vector<std::vector<std::size_t>> folds(k);
  std::size_t start = 0;
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t size = n / k + (f < n % k ? 1 : 0);
    folds[f].assign(idx.begin() + static_cast<std::ptrdiff_t>(start),
                    idx.begin() + static_cast<std::ptrdiff_t>(start + size));
    start += size;
  }
  return folds;
}

EvalReport evaluate(std::span<const double> pred, std::span<const double> truth,
                    std::span<const std::size_t> ks) {
  EvalReport report;
  report.samples = pred.size();
  report.rmse = rmse(pred, truth);
  report.median_ae = median_ae(pred, truth);
  report.spearman = spearman(pred, truth);
  for (const auto k : ks) {
    report.ks.push_back(k);
    report.ndcg_at_k.push_back(ndcg_at_k(pred, truth, k));
    report.over_at_k.push_back(over_at_k(pred, truth, k));
  }
  return report;
}

std::vector<std::string> report_columns(std::span<const std::size_t> ks) {
  std::vector<std::string> cols{"rmse", "median_ae"};
  for (const auto k : ks) cols.push_back("ndcg@" + std::to_string(k));
  cols.push_back("spearman");
  for (const auto k : ks) cols.push_back("over@" + std::to_string(k));
  return cols;
}

std::vector<double> report_values(const EvalReport& report) {
  std::vector<double> v{report.rmse, report.median_ae};
  v.insert(v.end(), report.ndcg_at_k.begin(), report.ndcg_at_k.end());
  v.push_back(report.spearman);
  v.insert(v.end(), report.over_at_k.begin(), report.over_at_k.end());
  return v;
}

}  // namespace licap
