#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "licap/kg.hpp"
#include "licap/pregat.hpp"
#include "licap/tensor.hpp"

namespace licap {

enum class NieKind { mlp, aggregated_scorer };

NieKind parse_nie_kind(const std::string& text);
std::string to_string(NieKind kind);

struct DownstreamConfig {
  NieKind kind = NieKind::mlp;
  std::size_t hidden_dim = 64;  ///< 0 turns the MLP into a linear head
  std::size_t epochs = 500;
  double learning_rate = 0.003;
  std::uint64_t seed = 0;
  double negative_slope = 0.2;
};

/// Trained importance regressor. Inputs are standardized with statistics of
/// the training rows before entering the network.
struct NieModel {
  NieKind kind = NieKind::mlp;
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;
  double negative_slope = 0.2;
  std::vector<double> feature_mean;
  std::vector<double> feature_scale;
  std::vector<NamedTensor> params;
  std::vector<double> train_mse;  ///< per epoch, before that epoch's update

  const Tensor& param(const std::string& name) const;
};

/// Two-layer perceptron (LeakyReLU hidden layer) fit by Adam on mean squared
/// error against the log-scores.
NieModel train_mlp(const Matrix& embeddings, const LabelSet& train, const DownstreamConfig& config);

/// s0_i = w.x_i + b, then one attention-weighted pass over the incoming
/// neighborhood: s_i = sum_j alpha_ij s0_j with
/// alpha_ij = softmax_j LeakyReLU(a . [x_i || x_j]).
NieModel train_aggregated_scorer(const MessageGraph& graph, const Matrix& embeddings,
                                 const LabelSet& train, const DownstreamConfig& config);

/// Scores for `nodes`. The aggregated scorer needs the graph it was trained on.
std::vector<double> predict(const NieModel& model, const Matrix& embeddings,
                            std::span<const NodeId> nodes, const MessageGraph* graph = nullptr);

/// Per-node attention of the aggregated scorer (E x 1, grouped like `graph`).
Tensor scorer_attention(const NieModel& model, const Matrix& embeddings, const MessageGraph& graph);

/// Power iteration over the original directed edges; dangling mass is spread
/// uniformly. Throws with the residual when `max_iter` is exhausted.
std::vector<double> pagerank(const KnowledgeGraph& kg, double damping = 0.85, double tol = 1e-10,
                             std::size_t max_iter = 1000);

}  // namespace licap
