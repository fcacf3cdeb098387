#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "licap/kg.hpp"
#include "licap/tensor.hpp"

namespace licap {

enum class EncoderMode { pregat, gat };

struct PreGatConfig {
  std::size_t in_dim = 0;           ///< F
  std::size_t hidden_dim = 8;       ///< F' per head
  std::size_t heads = 8;            ///< H
  std::size_t predicate_dim = 10;   ///< P'
  std::size_t predicate_count = 0;  ///< rows of the predicate table (augmented graph)
  std::size_t layers = 1;
  double negative_slope = 0.2;
  EncoderMode mode = EncoderMode::pregat;

  std::size_t out_dim() const noexcept { return heads * hidden_dim; }
  std::size_t attention_dim() const noexcept {
    return 2 * hidden_dim + (mode == EncoderMode::pregat ? predicate_dim : 0);
  }
};

struct PreGatLayer {
  std::size_t in_dim = 0;
  std::vector<Tensor> weights;    ///< per head, in_dim x hidden_dim
  std::vector<Tensor> attention;  ///< per head, attention_dim x 1
};

using NamedTensor = std::pair<std::string, Tensor>;

struct PreGatParams {
  PreGatConfig config;
  std::vector<PreGatLayer> layers;
  Tensor predicate_table;  ///< predicate_count x P'; undefined in GAT mode

  /// Every trainable tensor, in a fixed order.
  std::vector<Tensor> tensors() const;
  std::vector<NamedTensor> named_tensors() const;
  /// Deep copy with fresh leaves.
  PreGatParams clone() const;
  /// Copies values (not handles) from `other`, which must have equal shapes.
  void assign(const PreGatParams& other);
};

/// Edge arrays for message passing: entry e carries a message src[e] -> dst[e]
/// along predicate pred[e]. Entries are grouped by dst and sorted by (src, pred)
/// inside a group.
struct MessageGraph {
  std::size_t node_count = 0;
  std::size_t predicate_count = 0;
  std::vector<std::size_t> dst;
  std::vector<std::size_t> src;
  std::vector<std::size_t> pred;

  std::size_t edge_count() const noexcept { return dst.size(); }
};

/// Requires an augmented graph so that every node has at least its self edge.
MessageGraph message_graph(const KnowledgeGraph& augmented);

/// Predicate table ~ N(0, 1); W and a ~ U(-r, r) with r = sqrt(6 / (fan_in + fan_out)).
PreGatParams init_pregat(const PreGatConfig& config, std::uint64_t seed);

/// Per-head attention over each node's incoming entries for one layer:
///   alpha_ij = softmax_j LeakyReLU(a . [W h_i || phi(p_ij) || W h_j]).
std::vector<Tensor> attention_coefficients(const PreGatParams& params, const MessageGraph& graph,
                                           const Tensor& input, std::size_t layer = 0);

/// h_i = ||_h LeakyReLU(sum_k alpha^h_ik W^h h_k), stacked over the configured layers.
Tensor forward(const PreGatParams& params, const MessageGraph& graph, const Tensor& features);

}  // namespace licap
