#include "licap/synth.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "licap/error.hpp"

namespace licap {

SyntheticKg synth_kg(const SynthOptions& options) {
  if (options.nodes < 20) throw Error("synthetic graphs need at least 20 nodes");
  if (options.predicates == 0) throw Error("synthetic graphs need at least one predicate");
  const auto n = options.nodes;
  const auto m = std::max(n, options.edges == 0 ? 3 * n : options.edges);
  std::mt19937_64 rng(options.seed);

  Interner nodes;
  Interner predicates;
  for (std::size_t i = 0; i < n; ++i) nodes.intern("n" + std::to_string(i));
  for (std::size_t p = 0; p < options.predicates; ++p) predicates.intern("p" + std::to_string(p));

  // Urn holding every node once plus once per incoming edge.
  std::vector<NodeId> urn;
  urn.reserve(n + m);
  for (std::size_t i = 0; i < n; ++i) urn.push_back(static_cast<NodeId>(i));
  std::vector<std::size_t> in_degree(n, 0);
  std::uniform_int_distribution<NodeId> any_node(0, static_cast<NodeId>(n - 1));
  std::uniform_int_distribution<PredicateId> any_pred(0, static_cast<PredicateId>(options.predicates - 1));
  std::vector<Edge> edges;
  edges.reserve(m);
  // The first n edges give every node one outgoing edge so the triple file names every node.
  while (edges.size() < m) {
    const NodeId head = edges.size() < n ? static_cast<NodeId>(edges.size()) : any_node(rng);
    std::uniform_int_distribution<std::size_t> pick(0, urn.size() - 1);
    const NodeId tail = urn[pick(rng)];
    const PredicateId pred = any_pred(rng);
    if (tail == head) continue;
    edges.push_back({head, pred, tail});
    urn.push_back(tail);
    ++in_degree[tail];
  }

  std::normal_distribution<double> label_noise(0.0, options.label_noise);
  std::vector<std::pair<NodeId, double>> raw;
  raw.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
    raw.emplace_back(static_cast<NodeId>(i), static_cast<double>(in_degree[i]) + std::abs(label_noise(rng)));

  const auto dims = options.random_dims + options.signal_dims;
  FeatureMatrix features(n, dims);
  std::normal_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> feature_noise(0.0, options.feature_noise);
  std::uniform_real_distribution<double> weight(0.5, 1.5);
  std::vector<double> w(options.signal_dims);
  for (auto& v : w) v = weight(rng);
  for (std::size_t i = 0; i < n; ++i) {
    const double signal = std::log1p(static_cast<double>(in_degree[i]));
    for (std::size_t c = 0; c < options.random_dims; ++c) features(i, c) = unit(rng);
    for (std::size_t c = 0; c < options.signal_dims; ++c)
      features(i, options.random_dims + c) = w[c] * signal + feature_noise(rng);
  }

  return SyntheticKg{KnowledgeGraph(std::move(nodes), std::move(predicates), std::move(edges)),
                     LabelSet::from_raw(raw), std::move(features), std::move(in_degree)};
}

SyntheticKg synth_kg(std::size_t nodes, std::size_t predicates, std::uint64_t seed) {
  SynthOptions options;
  options.nodes = nodes;
  options.predicates = predicates;
  options.seed = seed;
  return synth_kg(options);
}

}  // namespace licap
