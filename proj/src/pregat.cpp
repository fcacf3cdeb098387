#include "licap/pregat.hpp"

#include <cmath>
#include <random>

#include "licap/error.hpp"

namespace licap {

namespace {

Tensor glorot(std::mt19937_64& rng, std::size_t fan_in, std::size_t fan_out) {
  const double r = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-r, r);
  std::vector<double> values(fan_in * fan_out);
  for (auto& v : values) v = dist(rng);
  return Tensor::from({fan_in, fan_out}, std::move(values), true);
}

Tensor copy_leaf(const Tensor& t) {
  const auto v = t.values();
  return Tensor::from(t.shape(), std::vector<double>(v.begin(), v.end()), true);
}

void copy_values(Tensor& dst, const Tensor& src) {
  if (dst.shape() != src.shape())
    throw Error("parameter shape mismatch " + dst.shape().str() + " vs " + src.shape().str());
  const auto s = src.values();
  auto d = dst.mutable_values();
  std::copy(s.begin(), s.end(), d.begin());
}

std::vector<std::size_t> iota_from(std::size_t start, std::size_t count) {
  std::vector<std::size_t> out(count);
  for (std::size_t i = 0; i < count; ++i) out[i] = start + i;
  return out;
}

// a = [a_dst; a_pred; a_src], so a . [z_i || phi(p) || z_j] splits into a
// per-node destination score and a per-entry remainder.
Tensor attention(const PreGatParams& params, const MessageGraph& graph, const Tensor& z,
                 std::size_t layer, std::size_t head) {
  const auto& cfg = params.config;
  const auto f = cfg.hidden_dim;
  const auto p = cfg.mode == EncoderMode::pregat ? cfg.predicate_dim : 0;
  const Tensor& a = params.layers[layer].attention[head];
  const Tensor dst_score = matmul(z, gather_rows(a, iota_from(0, f)));
  Tensor entry_score = gather_rows(matmul(z, gather_rows(a, iota_from(f + p, f))), graph.src);
  if (cfg.mode == EncoderMode::pregat) {
    const Tensor pred_score = matmul(params.predicate_table, gather_rows(a, iota_from(f, p)));
    entry_score = add(entry_score, gather_rows(pred_score, graph.pred));
  }
  return attention_softmax(dst_score, entry_score, graph.dst, cfg.negative_slope);
}

void check_inputs(const PreGatParams& params, const MessageGraph& graph, const Tensor& input,
                  std::size_t layer) {
  if (layer >= params.layers.size()) throw Error("PreGAT layer index out of range");
  if (input.rows() != graph.node_count)
    throw Error("PreGAT input has " + std::to_string(input.rows()) + " rows for " +
                std::to_string(graph.node_count) + " nodes");
  if (input.cols() != params.layers[layer].in_dim)
    throw Error("PreGAT layer " + std::to_string(layer) + " expects " +
                std::to_string(params.layers[layer].in_dim) + " input columns, got " +
                std::to_string(input.cols()));
  if (params.config.mode == EncoderMode::pregat &&
      params.predicate_table.rows() < graph.predicate_count)
    throw Error("predicate table has fewer rows than the graph has predicates");
}

}  // namespace

std::vector<Tensor> PreGatParams::tensors() const {
  std::vector<Tensor> out;
  for (const auto& named : named_tensors()) out.push_back(named.second);
  return out;
}

std::vector<NamedTensor> PreGatParams::named_tensors() const {
  std::vector<NamedTensor> out;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    for (std::size_t h = 0; h < layers[l].weights.size(); ++h) {
      const auto prefix = "layer" + std::to_string(l) + ".head" + std::to_string(h);
      out.emplace_back(prefix + ".W", layers[l].weights[h]);
      out.emplace_back(prefix + ".a", layers[l].attention[h]);
    }
  }
  if (predicate_table.defined()) out.emplace_back("predicate_table", predicate_table);
  return out;
}

PreGatParams PreGatParams::clone() const {
  PreGatParams out;
  out.config = config;
  for (const auto& layer : layers) {
    PreGatLayer copy;
    copy.in_dim = layer.in_dim;
    for (const auto& w : layer.weights) copy.weights.push_back(copy_leaf(w));
    for (const auto& a : layer.attention) copy.attention.push_back(copy_leaf(a));
    out.layers.push_back(std::move(copy));
  }
  if (predicate_table.defined()) out.predicate_table = copy_leaf(predicate_table);
  return out;
}

void PreGatParams::assign(const PreGatParams& other) {
  auto mine = tensors();
  const auto theirs = other.tensors();
  if (mine.size() != theirs.size()) throw Error("parameter sets differ in structure");
  for (std::size_t i = 0; i < mine.size(); ++i) copy_values(mine[i], theirs[i]);
}

MessageGraph message_graph(const KnowledgeGraph& augmented) {
  if (!augmented.augmented())
    throw Error("message passing needs a graph with reverse and self edges; call augment_for_message_passing");
  MessageGraph g;
  g.node_count = augmented.node_count();
  g.predicate_count = augmented.predicate_count();
  g.dst.reserve(augmented.edge_count());
  g.src.reserve(augmented.edge_count());
  g.pred.reserve(augmented.edge_count());
  for (NodeId i = 0; i < augmented.node_count(); ++i) {
    for (const auto& nb : augmented.incoming(i)) {
      g.dst.push_back(i);
      g.src.push_back(nb.node);
      g.pred.push_back(nb.predicate);
    }
  }
  return g;
}

PreGatParams init_pregat(const PreGatConfig& config, std::uint64_t seed) {
  if (config.in_dim == 0 || config.hidden_dim == 0 || config.heads == 0 || config.layers == 0)
    throw Error("PreGAT dimensions (F, F', H, layers) must be positive");
  if (config.mode == EncoderMode::pregat && config.predicate_count == 0)
    throw Error("PreGAT needs a positive predicate count");
  if (!(config.negative_slope > 0.0 && config.negative_slope < 1.0))
    throw Error("LeakyReLU slope must lie in (0, 1)");

  std::mt19937_64 rng(seed);
  PreGatParams params;
  params.config = config;
  std::size_t in_dim = config.in_dim;
  for (std::size_t l = 0; l < config.layers; ++l) {
    PreGatLayer layer;
    layer.in_dim = in_dim;
    for (std::size_t h = 0; h < config.heads; ++h) layer.weights.push_back(glorot(rng, in_dim, config.hidden_dim));
    for (std::size_t h = 0; h < config.heads; ++h) layer.attention.push_back(glorot(rng, config.attention_dim(), 1));
    params.layers.push_back(std::move(layer));
    in_dim = config.out_dim();
  }
  // Drawn last so W and a do not depend on the encoder mode or P'.
  if (config.mode == EncoderMode::pregat) {
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> table(config.predicate_count * config.predicate_dim);
    for (auto& v : table) v = normal(rng);
    params.predicate_table =
        Tensor::from({config.predicate_count, config.predicate_dim}, std::move(table), true);
  }
  return params;
}

std::vector<Tensor> attention_coefficients(const PreGatParams& params, const MessageGraph& graph,
                                           const Tensor& input, std::size_t layer) {
  check_inputs(params, graph, input, layer);
  std::vector<Tensor> out;
  for (std::size_t h = 0; h < params.config.heads; ++h) {
    const Tensor z = matmul(input, params.layers[layer].weights[h]);
    out.push_back(attention(params, graph, z, layer, h));
  }
  return out;
}

Tensor forward(const PreGatParams& params, const MessageGraph& graph, const Tensor& features) {
  Tensor x = features;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    check_inputs(params, graph, x, l);
    std::vector<Tensor> heads;
    for (std::size_t h = 0; h < params.config.heads; ++h) {
      const Tensor z = matmul(x, params.layers[l].weights[h]);
      const Tensor alpha = attention(params, graph, z, l, h);
      const Tensor messages = scale_rows(gather_rows(z, graph.src), alpha);
      heads.push_back(leaky_relu(scatter_add_rows(messages, graph.dst, graph.node_count),
                                 params.config.negative_slope));
    }
    x = concat_cols(heads);
  }
  return x;
}

}  // namespace licap
