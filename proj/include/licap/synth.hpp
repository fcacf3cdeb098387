#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "licap/kg.hpp"

namespace licap {

struct SynthOptions {
  std::size_t nodes = 500;
  std::size_t predicates = 5;
  std::size_t edges = 0;  ///< 0 means 3 per node
  std::uint64_t seed = 0;
  double label_noise = 0.5;    ///< raw = in_degree + |N(0, label_noise)|
  double feature_noise = 2.0;  ///< std of the noise on the signal block
  std::size_t random_dims = 16;
  std::size_t signal_dims = 4;
};

/// Planted-signal fixture: graph, labels on every node, and features.
struct SyntheticKg {
  KnowledgeGraph graph;
  LabelSet labels;
  FeatureMatrix features;
  std::vector<std::size_t> in_degree;
};

/// Preferential-attachment multigraph: each edge picks a uniform head and a
/// tail with probability proportional to 1 + current in-degree, with a
/// uniform predicate. Node names are n0..n{N-1} with ids equal to the index.
SyntheticKg synth_kg(const SynthOptions& options);
SyntheticKg synth_kg(std::size_t nodes, std::size_t predicates, std::uint64_t seed);

}  // namespace licap
