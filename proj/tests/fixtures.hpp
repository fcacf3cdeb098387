#pragma once

#include <random>
#include <string>
#include <vector>

#include "licap/kg.hpp"
#include "licap/pregat.hpp"
#include "licap/tensor.hpp"

namespace fixtures {

/// Graph over nodes v0..v{n-1} and predicates r0..r{p-1}.
inline licap::KnowledgeGraph make_graph(std::size_t nodes, std::size_t predicates,
                                        const std::vector<licap::Edge>& edges) {
  licap::Interner names;
  for (std::size_t i = 0; i < nodes; ++i) names.intern("v" + std::to_string(i));
  licap::Interner preds;
  for (std::size_t p = 0; p < predicates; ++p) preds.intern("r" + std::to_string(p));
  return licap::KnowledgeGraph(std::move(names), std::move(preds), edges);
}

inline std::vector<licap::Edge> random_edges(std::size_t nodes, std::size_t predicates,
                                             std::size_t count, std::mt19937_64& rng) {
  std::vector<licap::Edge> edges;
  for (std::size_t e = 0; e < count; ++e)
    edges.push_back({static_cast<licap::NodeId>(rng() % nodes),
                     static_cast<licap::PredicateId>(rng() % predicates),
                     static_cast<licap::NodeId>(rng() % nodes)});
  return edges;
}

inline licap::MessageGraph messages(const licap::KnowledgeGraph& kg) {
  return licap::message_graph(licap::augment_for_message_passing(kg));
}

inline licap::Tensor random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng,
                                   bool grad = false) {
  std::normal_distribution<double> d(0.0, 1.0);
  std::vector<double> v(rows * cols);
  for (auto& x : v) x = d(rng);
  return licap::Tensor::from({rows, cols}, std::move(v), grad);
}

/// Overwrites every parameter with fresh N(0, scale^2) values.
inline void perturb(const std::vector<licap::Tensor>& params, std::mt19937_64& rng,
                    double scale = 1.0) {
  std::normal_distribution<double> d(0.0, scale);
  for (auto t : params)
    for (auto& v : t.mutable_values()) v = d(rng);
}

}  // namespace fixtures
