#include "licap/binning.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "licap/error.hpp"

namespace licap {

namespace {

// Exact while the result stays below 2^53 (N <= 56); beyond that the
// relative error stays at rounding level.
double binomial(std::size_t n, std::size_t k) {
  if (k > n) return 0.0;
  k = std::min(k, n - k);
  double c = 1.0;
  for (std::size_t i = 0; i < k; ++i) c = c * static_cast<double>(n - i) / static_cast<double>(i + 1);
  return std::round(c) < 9007199254740992.0 ? std::round(c) : c;
}

}  // namespace

TopSplit split_top(const LabelSet& labels, double gamma) {
  if (!(gamma > 0.0 && gamma <= 1.0))
    throw Error("important ratio gamma must lie in (0, 1], got " + std::to_string(gamma));
  if (labels.size() < 2) throw Error("at least 2 labelled nodes are required to split top nodes");

  std::vector<LabelSet::Entry> ranked = labels.entries();
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.node < b.node;
  });
  const auto n = ranked.size();
  auto k = static_cast<std::size_t>(std::ceil(gamma * static_cast<double>(n)));
  k = std::clamp<std::size_t>(k, 1, n);

  TopSplit split;
  for (std::size_t i = 0; i < n; ++i) (i < k ? split.top : split.nontop).push_back(ranked[i].node);
  std::sort(split.nontop.begin(), split.nontop.end());
  return split;
}

std::vector<std::vector<NodeId>> finer_bins(std::span<const NodeId> top, const LabelSet& labels,
                                            double bin_width) {
  if (!(bin_width > 0.0) || !std::isfinite(bin_width))
    throw Error("bin width must be positive, got " + std::to_string(bin_width));
  if (top.empty()) throw Error("cannot bin an empty top set");

  double lo = labels.score(top.front());
  for (const NodeId n : top) lo = std::min(lo, labels.score(n));

  // interval index -> members; intervals are [lo + k w, lo + (k+1) w)
  std::vector<std::pair<std::size_t, NodeId>> keyed;
  keyed.reserve(top.size());
  for (const NodeId n : top) {
    const auto k = static_cast<std::size_t>(std::floor((labels.score(n) - lo) / bin_width));
    keyed.emplace_back(k, n);
  }
  std::sort(keyed.begin(), keyed.end(), [&](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first < b.first;
    const double sa = labels.score(a.second);
    const double sb = labels.score(b.second);
    if (sa != sb) return sa < sb;
    return a.second < b.second;
  });

  std::vector<std::vector<NodeId>> bins;
  for (std::size_t i = 0; i < keyed.size(); ++i) {
    if (i == 0 || keyed[i].first != keyed[i - 1].first) bins.emplace_back();
    bins.back().push_back(keyed[i].second);
  }
  return bins;
}

Matrix proximity_matrix(std::size_t bin_count) {
  if (bin_count == 0) throw Error("proximity matrix needs at least one bin");
  const auto b = static_cast<long>(bin_count);
  Matrix beta(bin_count, bin_count);
  for (long m = 1; m <= b; ++m) {
    const long half = std::max(m, b - m);
    const auto big_n = static_cast<std::size_t>(2 * half);
    const double center = binomial(big_n, static_cast<std::size_t>(half));
    for (long n = 1; n <= b; ++n) {
      const long k = n - m + half;
      double value = 0.0;
      if (std::isfinite(center)) {
        value = binomial(big_n, static_cast<std::size_t>(k)) / center;
      } else {
        // C(N, k) / C(N, N/2) = (N/2)!^2 / (k! (N-k)!)
        value = std::exp(2.0 * std::lgamma(static_cast<double>(half) + 1.0) -
                         std::lgamma(static_cast<double>(k) + 1.0) -
                         std::lgamma(static_cast<double>(2 * half - k) + 1.0));
      }
      beta(static_cast<std::size_t>(m - 1), static_cast<std::size_t>(n - 1)) = value;
    }
  }
  return beta;
}

BinAssignment assign_bins(const LabelSet& labels, double gamma, double bin_width) {
  auto split = split_top(labels, gamma);
  BinAssignment out;
  out.finer_bins = finer_bins(split.top, labels, bin_width);
  out.beta = proximity_matrix(out.finer_bins.size());
  out.top_nodes = std::move(split.top);
  out.nontop_nodes = std::move(split.nontop);
  out.bin_width = bin_width;
  out.gamma = gamma;
  return out;
}

std::vector<double> prototype(const Matrix& embeddings, std::span<const NodeId> nodes) {
  if (nodes.empty()) throw Error("prototype of an empty node set is undefined");
  std::vector<double> mean(embeddings.cols, 0.0);
  for (const NodeId n : nodes) {
    if (n >= embeddings.rows) throw Error("node id " + std::to_string(n) + " outside embedding rows");
    const auto row = embeddings.row(n);
    for (std::size_t c = 0; c < mean.size(); ++c) mean[c] += row[c];
  }
  for (auto& v : mean) v /= static_cast<double>(nodes.size());
  return mean;
}

}  // namespace licap
