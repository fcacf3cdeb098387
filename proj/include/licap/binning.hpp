#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "licap/kg.hpp"

namespace licap {

/// Labelled nodes split by the important ratio.
struct TopSplit {
  std::vector<NodeId> top;     ///< descending score, ties by ascending id
  std::vector<NodeId> nontop;  ///< ascending id
};

/// Top/non-top split plus finer bins of the top set and their proximity
/// coefficients.
struct BinAssignment {
  std::vector<NodeId> top_nodes;
  std::vector<NodeId> nontop_nodes;
  std::vector<std::vector<NodeId>> finer_bins;  ///< ascending score interval
  double bin_width = 1.0;
  double gamma = 0.1;
  Matrix beta;  ///< finer_bins.size() squared
};

/// Takes the ceil(gamma * n) best-scoring labelled nodes (at least one).
TopSplit split_top(const LabelSet& labels, double gamma);

/// Width-based bins over the top scores, anchored at the minimum top score.
/// Empty intervals are dropped; the rest are numbered by ascending score.
std::vector<std::vector<NodeId>> finer_bins(std::span<const NodeId> top,
                                            const LabelSet& labels, double bin_width);

/// Normalized binomial proximity between finer bins (1-indexed m, n):
///   N = 2 max(m, B - m),  beta_mn = C(N, n - m + N/2) / C(N, N/2).
Matrix proximity_matrix(std::size_t bin_count);

BinAssignment assign_bins(const LabelSet& labels, double gamma, double bin_width);

/// Element-wise mean of the given rows.
std::vector<double> prototype(const Matrix& embeddings, std::span<const NodeId> nodes);

}  // namespace licap
