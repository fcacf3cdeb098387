#include "licap/downstream.hpp"

#include <cmath>
#include <numeric>
#include <random>

#include "licap/adam.hpp"
#include "licap/error.hpp"
#include "licap/pretrain.hpp"

namespace licap {

namespace {

Tensor glorot(std::mt19937_64& rng, std::size_t fan_in, std::size_t fan_out) {
  const double r = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-r, r);
  std::vector<double> values(fan_in * fan_out);
  for (auto& v : values) v = dist(rng);
  return Tensor::from({fan_in, fan_out}, std::move(values), true);
}

void check_training_inputs(const Matrix& embeddings, const LabelSet& train) {
  if (train.empty()) throw Error("training split is empty");
  if (embeddings.cols == 0) throw Error("embeddings have no columns");
  for (const auto& e : train.entries())
    if (e.node >= embeddings.rows)
      throw Error("labelled node id " + std::to_string(e.node) + " has no embedding row");
}

void fit_standardizer(NieModel& model, const Matrix& embeddings, const LabelSet& train) {
  const auto d = embeddings.cols;
  model.feature_mean.assign(d, 0.0);
  model.feature_scale.assign(d, 0.0);
  const double n = static_cast<double>(train.size());
  for (const auto& e : train.entries())
    for (std::size_t c = 0; c < d; ++c) model.feature_mean[c] += embeddings(e.node, c);
  for (auto& v : model.feature_mean) v /= n;
  for (const auto& e : train.entries())
    for (std::size_t c = 0; c < d; ++c) {
      const double diff = embeddings(e.node, c) - model.feature_mean[c];
      model.feature_scale[c] += diff * diff;
    }
  for (auto& v : model.feature_scale) {
    v = std::sqrt(v / n);
    if (!(v > 1e-12)) v = 1.0;
  }
}

Tensor standardized(const NieModel& model, const Matrix& embeddings) {
  if (embeddings.cols != model.input_dim)
    throw Error("model expects " + std::to_string(model.input_dim) + "-dimensional embeddings, got " +
                std::to_string(embeddings.cols));
  Matrix x = embeddings;
  for (std::size_t r = 0; r < x.rows; ++r)
    for (std::size_t c = 0; c < x.cols; ++c)
      x(r, c) = (x(r, c) - model.feature_mean[c]) / model.feature_scale[c];
  return to_tensor(x);
}

// Linear head (plus optional hidden layer) applied to every row of x.
Tensor mlp_forward(const NieModel& model, const Tensor& x) {
  if (model.hidden_dim == 0) return add_row(matmul(x, model.param("W1")), model.param("b1"));
  const Tensor hidden =
      leaky_relu(add_row(matmul(x, model.param("W1")), model.param("b1")), model.negative_slope);
  return add_row(matmul(hidden, model.param("W2")), model.param("b2"));
}

Tensor scorer_attention_tensor(const NieModel& model, const Tensor& x, const MessageGraph& graph) {
  if (graph.node_count != x.rows())
    throw Error("graph has " + std::to_string(graph.node_count) + " nodes but embeddings have " +
                std::to_string(x.rows()) + " rows");
  const Tensor& a = model.param("a");
  const auto d = x.cols();
  std::vector<std::size_t> first(d), second(d);
  for (std::size_t i = 0; i < d; ++i) {
    first[i] = i;
    second[i] = d + i;
  }
  const Tensor dst_score = matmul(x, gather_rows(a, first));
  const Tensor src_score = gather_rows(matmul(x, gather_rows(a, second)), graph.src);
  return attention_softmax(dst_score, src_score, graph.dst, model.negative_slope);
}

Tensor scorer_forward(const NieModel& model, const Tensor& x, const MessageGraph& graph) {
  const Tensor initial = add_row(matmul(x, model.param("W1")), model.param("b1"));
  const Tensor alpha = scorer_attention_tensor(model, x, graph);
  return scatter_add_rows(scale_rows(gather_rows(initial, graph.src), alpha), graph.dst,
                          graph.node_count);
}

NieModel init_head(const Matrix& embeddings, const LabelSet& train, const DownstreamConfig& config,
                   std::size_t hidden_dim, std::mt19937_64& rng) {
  NieModel model;
  model.kind = config.kind;
  model.input_dim = embeddings.cols;
  model.hidden_dim = hidden_dim;
  model.negative_slope = config.negative_slope;
  fit_standardizer(model, embeddings, train);

  const auto scores = train.scores();
  const double mean_label =
      std::accumulate(scores.begin(), scores.end(), 0.0) / static_cast<double>(scores.size());
  const auto d = embeddings.cols;
  if (hidden_dim == 0) {
    model.params.emplace_back("W1", glorot(rng, d, 1));
    model.params.emplace_back("b1", Tensor::full({1, 1}, mean_label, true));
  } else {
    model.params.emplace_back("W1", glorot(rng, d, hidden_dim));
    model.params.emplace_back("b1", Tensor::zeros({1, hidden_dim}, true));
    model.params.emplace_back("W2", glorot(rng, hidden_dim, 1));
    model.params.emplace_back("b2", Tensor::full({1, 1}, mean_label, true));
  }
  return model;
}

template <typename Forward>
void fit(NieModel& model, const LabelSet& train, const DownstreamConfig& config, Forward&& predict_rows) {
  if (config.epochs == 0) throw Error("downstream epochs must be positive");
  std::vector<Tensor> tensors;
  for (const auto& [name, t] : model.params) tensors.push_back(t);
  Adam adam(tensors, AdamOptions{config.learning_rate});
  const Tensor target = Tensor::from({train.size(), 1}, train.scores());
  const double inv_n = 1.0 / static_cast<double>(train.size());
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const Tensor residual = sub(predict_rows(), target);
    const Tensor mse = scale(sum(mul(residual, residual)), inv_n);
    if (!std::isfinite(mse.item()))
      throw Error("downstream training diverged at epoch " + std::to_string(epoch + 1));
    model.train_mse.push_back(mse.item());
    adam.zero_grad();
    mse.backward();
    adam.step();
  }
}

std::vector<std::size_t> train_rows(const LabelSet& train) {
  std::vector<std::size_t> rows;
  for (const auto& e : train.entries()) rows.push_back(e.node);
  return rows;
}

}  // namespace

NieKind parse_nie_kind(const std::string& text) {
  if (text == "mlp") return NieKind::mlp;
  if (text == "aggregated" || text == "aggregated_scorer") return NieKind::aggregated_scorer;
  throw Error("unknown model kind '" + text + "' (mlp, aggregated)");
}

std::string to_string(NieKind kind) { return kind == NieKind::mlp ? "mlp" : "aggregated"; }

const Tensor& NieModel::param(const std::string& name) const {
  for (const auto& [n, t] : params)
    if (n == name) return t;
  throw Error("model has no parameter '" + name + "'");
}

NieModel train_mlp(const Matrix& embeddings, const LabelSet& train, const DownstreamConfig& config) {
  check_training_inputs(embeddings, train);
  std::mt19937_64 rng(config.seed);
  DownstreamConfig cfg = config;
  cfg.kind = NieKind::mlp;
  NieModel model = init_head(embeddings, train, cfg, config.hidden_dim, rng);
  const Tensor x = gather_rows(standardized(model, embeddings), train_rows(train));
  fit(model, train, config, [&] { return mlp_forward(model, x); });
  return model;
}

NieModel train_aggregated_scorer(const MessageGraph& graph, const Matrix& embeddings,
                                 const LabelSet& train, const DownstreamConfig& config) {
  check_training_inputs(embeddings, train);
  std::mt19937_64 rng(config.seed);
  DownstreamConfig cfg = config;
  cfg.kind = NieKind::aggregated_scorer;
  NieModel model = init_head(embeddings, train, cfg, 0, rng);
  model.params.emplace_back("a", glorot(rng, 2 * embeddings.cols, 1));
  const Tensor x = standardized(model, embeddings);
  const auto rows = train_rows(train);
  fit(model, train, config, [&] { return gather_rows(scorer_forward(model, x, graph), rows); });
  return model;
}

std::vector<double> predict(const NieModel& model, const Matrix& embeddings,
                            std::span<const NodeId> nodes, const MessageGraph* graph) {
  const Tensor x = standardized(model, embeddings);
  Tensor scores;
  if (model.kind == NieKind::mlp) {
    scores = mlp_forward(model, x);
  } else {
    if (graph == nullptr) throw Error("the aggregated scorer needs the message-passing graph to predict");
    scores = scorer_forward(model, x, *graph);
  }
  std::vector<double> out;
  out.reserve(nodes.size());
  for (const NodeId n : nodes) {
    if (n >= scores.rows()) throw Error("node id " + std::to_string(n) + " outside embedding rows");
    out.push_back(scores.at(n, 0));
  }
  return out;
}

Tensor scorer_attention(const NieModel& model, const Matrix& embeddings, const MessageGraph& graph) {
  if (model.kind != NieKind::aggregated_scorer) throw Error("model is not an aggregated scorer");
  return scorer_attention_tensor(model, standardized(model, embeddings), graph);
}

std::vector<double> pagerank(const KnowledgeGraph& kg, double damping, double tol, std::size_t max_iter) {
  if (!(damping > 0.0 && damping < 1.0)) throw Error("PageRank damping must lie in (0, 1)");
  if (kg.augmented()) throw Error("PageRank runs on the original graph, not the augmented one");
  const auto n = kg.node_count();
  if (n == 0) throw Error("PageRank on an empty graph");

  std::vector<double> out_degree(n, 0.0);
  for (const auto& e : kg.edges()) out_degree[e.head] += 1.0;
  const double inv_n = 1.0 / static_cast<double>(n);
  std::vector<double> rank(n, inv_n);
  std::vector<double> next(n);
  double residual = 0.0;
  for (std::size_t iter = 0; iter < max_iter; ++iter) {
    double dangling = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if (out_degree[i] == 0.0) dangling += rank[i];
    const double base = (1.0 - damping) * inv_n + damping * dangling * inv_n;
    for (NodeId j = 0; j < n; ++j) {
      double inflow = 0.0;
      for (const auto& nb : kg.incoming(j)) inflow += rank[nb.node] / out_degree[nb.node];
      next[j] = base + damping * inflow;
    }
    residual = 0.0;
    for (std::size_t i = 0; i < n; ++i) residual += std::abs(next[i] - rank[i]);
    rank.swap(next);
    if (residual < tol) {
      const double total = std::accumulate(rank.begin(), rank.end(), 0.0);
      for (auto& v : rank) v /= total;
      return rank;
    }
  }
  throw Error("PageRank did not converge in " + std::to_string(max_iter) +
              " iterations (L1 residual " + std::to_string(residual) + ")");
}

}  // namespace licap
