#include "licap/pretrain.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "licap/adam.hpp"
#include "licap/error.hpp"

namespace licap {

namespace {

std::vector<std::size_t> as_index(std::span<const NodeId> nodes) {
  return {nodes.begin(), nodes.end()};
}

}  // namespace

Variant parse_variant(const std::string& text) {
  if (text == "full") return Variant::full;
  if (text == "l1_only") return Variant::l1_only;
  if (text == "l2_only") return Variant::l2_only;
  if (text == "random_sampling") return Variant::random_sampling;
  throw Error("unknown variant '" + text + "' (full, l1_only, l2_only, random_sampling)");
}

std::string to_string(Variant v) {
  switch (v) {
    case Variant::full: return "full";
    case Variant::l1_only: return "l1_only";
    case Variant::l2_only: return "l2_only";
    case Variant::random_sampling: return "random_sampling";
  }
  return "?";
}

EncoderMode parse_encoder(const std::string& text) {
  if (text == "pregat") return EncoderMode::pregat;
  if (text == "gat") return EncoderMode::gat;
  throw Error("unknown encoder '" + text + "' (pregat, gat)");
}

std::string to_string(EncoderMode m) { return m == EncoderMode::pregat ? "pregat" : "gat"; }

void PretrainConfig::validate() const {
  if (!(gamma > 0.0 && gamma < 1.0))
    throw Error("gamma must lie in (0, 1) so that non-top nodes exist, got " + std::to_string(gamma));
  if (!(tau > 0.0)) throw Error("temperature tau must be positive");
  if (!(eta1 >= 0.0) || !(eta2 >= 0.0)) throw Error("loss weights eta1, eta2 must be nonnegative");
  if (!(k_neg > 0.0 && k_neg <= 1.0)) throw Error("negative sampling ratio k_neg must lie in (0, 1]");
  if (!(bin_width > 0.0)) throw Error("bin width must be positive");
  if (epochs < 1) throw Error("epochs must be at least 1");
  if (monitor_window < 1) throw Error("monitor window must be at least 1");
  if (!(learning_rate > 0.0)) throw Error("learning rate must be positive");
}

std::vector<NodeId> sample_negatives(std::span<const NodeId> nontop, double k_neg,
                                     std::mt19937_64& rng) {
  if (nontop.empty()) throw Error("cannot sample negatives from an empty non-top set");
  if (!(k_neg > 0.0 && k_neg <= 1.0)) throw Error("k_neg must lie in (0, 1]");
  const auto n = nontop.size();
  auto k = static_cast<std::size_t>(std::ceil(k_neg * static_cast<double>(n)));
  k = std::clamp<std::size_t>(k, 1, n);
  // partial Fisher-Yates
  std::vector<NodeId> pool(nontop.begin(), nontop.end());
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  pool.resize(k);
  return pool;
}

Tensor loss_l1(const Tensor& embeddings, std::span<const NodeId> top, const Tensor& top_prototype,
               std::span<const NodeId> negatives, double tau) {
  if (!(tau > 0.0)) throw Error("temperature tau must be positive");
  if (top.empty()) throw Error("L1 needs at least one top node");
  const double inv_tau = 1.0 / tau;
  const Tensor anchors = gather_rows(embeddings, as_index(top));
  const Tensor positive = scale(matmul(anchors, transpose(top_prototype)), inv_tau);
  Tensor logits = positive;
  if (!negatives.empty()) {
    const Tensor neg = gather_rows(embeddings, as_index(negatives));
    const Tensor parts[] = {positive, scale(matmul(anchors, transpose(neg)), inv_tau)};
    logits = concat_cols(parts);
  }
  const std::vector<std::size_t> first(top.size(), 0);
  return sum(softmax_cross_entropy(logits, first));
}

Tensor loss_l2(const Tensor& embeddings, const std::vector<std::vector<NodeId>>& bins,
               const Tensor& prototypes, const Matrix& beta, double tau) {
  if (!(tau > 0.0)) throw Error("temperature tau must be positive");
  const auto b = bins.size();
  if (b == 0) throw Error("L2 needs at least one finer bin");
  if (prototypes.rows() != b || beta.rows != b || beta.cols != b)
    throw Error("L2: bins, prototypes and beta disagree on the bin count");

  std::vector<std::size_t> rows;
  std::vector<std::size_t> bin_of_row;
  for (std::size_t m = 0; m < b; ++m) {
    if (bins[m].empty()) throw Error("L2: finer bin " + std::to_string(m + 1) + " is empty");
    for (const NodeId n : bins[m]) {
      rows.push_back(n);
      bin_of_row.push_back(m);
    }
  }
  std::vector<double> weights(rows.size() * b);
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t n = 0; n < b; ++n) weights[r * b + n] = beta(bin_of_row[r], n);

  const Tensor members = gather_rows(embeddings, rows);
  const Tensor sims = matmul(members, transpose(prototypes));
  const Tensor logits = scale(mul(sims, Tensor::from(sims.shape(), std::move(weights))), 1.0 / tau);
  // beta_mm == 1, so the positive logit is the diagonal entry of `logits`.
  return sum(softmax_cross_entropy(logits, bin_of_row));
}

Tensor total_loss(const Tensor& l1, const Tensor& l2, double eta1, double eta2) {
  if (l1.size() != 1 || l2.size() != 1) throw Error("total_loss expects scalar losses");
  return add(scale(l1, eta1), scale(l2, eta2));
}

Tensor to_tensor(const Matrix& m, bool requires_grad) {
  return Tensor::from({m.rows, m.cols}, m.values, requires_grad);
}

Matrix to_matrix(const Tensor& t) {
  Matrix m(t.rows(), t.cols());
  const auto v = t.values();
  std::copy(v.begin(), v.end(), m.values.begin());
  return m;
}

PretrainResult pretrain(const KnowledgeGraph& kg, const FeatureMatrix& features,
                        const LabelSet& labels, const PretrainConfig& config) {
  config.validate();
  const KnowledgeGraph augmented = kg.augmented() ? kg : augment_for_message_passing(kg);
  if (features.rows != augmented.node_count())
    throw Error("feature matrix has " + std::to_string(features.rows) + " rows for " +
                std::to_string(augmented.node_count()) + " nodes");
  for (const auto& e : labels.entries())
    if (e.node >= augmented.node_count()) throw Error("label refers to a node outside the graph");

  const MessageGraph graph = message_graph(augmented);
  std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);

  PretrainResult result;
  double eta1 = config.eta1;
  double eta2 = config.eta2;
  Matrix beta;
  if (config.variant == Variant::random_sampling) {
    // Positive set of the same size as the top set, drawn uniformly from all
    // labelled nodes; negatives come from the remainder. L1 only.
    const auto split = split_top(labels, config.gamma);
    std::vector<NodeId> pool = labels.nodes();
    std::shuffle(pool.begin(), pool.end(), rng);
    result.top_nodes.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(split.top.size()));
    result.nontop_nodes.assign(pool.begin() + static_cast<std::ptrdiff_t>(split.top.size()), pool.end());
    std::sort(result.top_nodes.begin(), result.top_nodes.end());
    std::sort(result.nontop_nodes.begin(), result.nontop_nodes.end());
    eta2 = 0.0;
  } else {
    auto bins = assign_bins(labels, config.gamma, config.bin_width);
    result.top_nodes = std::move(bins.top_nodes);
    result.nontop_nodes = std::move(bins.nontop_nodes);
    result.finer_bins = std::move(bins.finer_bins);
    beta = std::move(bins.beta);
    if (config.variant == Variant::l1_only) eta2 = 0.0;
    if (config.variant == Variant::l2_only) eta1 = 0.0;
  }
  if (result.nontop_nodes.empty()) throw Error("non-top set is empty; lower gamma");

  PreGatConfig enc;
  enc.in_dim = features.cols;
  enc.hidden_dim = config.hidden_dim;
  enc.heads = config.heads;
  enc.predicate_dim = config.predicate_dim;
  enc.predicate_count = augmented.predicate_count();
  enc.layers = config.layers;
  enc.negative_slope = config.negative_slope;
  enc.mode = config.encoder;
  PreGatParams params = init_pregat(enc, config.seed);
  PreGatParams best = params.clone();
  Adam adam(params.tensors(), AdamOptions{config.learning_rate});

  const Tensor input = to_tensor(features);
  const auto top_index = as_index(result.top_nodes);
  result.best_loss = std::numeric_limits<double>::infinity();
  double window_sum = 0.0;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const Tensor h = forward(params, graph, input);
    const Tensor c_top = mean_rows(h, top_index);
    const auto negatives = sample_negatives(result.nontop_nodes, config.k_neg, rng);
    const Tensor l1 = loss_l1(h, result.top_nodes, c_top, negatives, config.tau);
    Tensor l2 = Tensor::scalar(0.0);
    if (!result.finer_bins.empty()) {
      std::vector<Tensor> protos;
      for (const auto& bin : result.finer_bins) protos.push_back(mean_rows(h, as_index(bin)));
      l2 = loss_l2(h, result.finer_bins, concat_rows(protos), beta, config.tau);
    }
    const Tensor loss = total_loss(l1, l2, eta1, eta2);
    const EpochRecord record{epoch, l1.item(), l2.item(), loss.item()};
    if (!std::isfinite(record.total))
      throw Error("pretraining diverged: non-finite loss at epoch " + std::to_string(epoch) +
                  " (L1=" + std::to_string(record.l1) + ", L2=" + std::to_string(record.l2) + ")");
    result.log.push_back(record);

    // Monitor the trailing mean: fresh negatives every epoch make the raw loss noisy.
    window_sum += record.total;
    if (result.log.size() > config.monitor_window)
      window_sum -= result.log[result.log.size() - 1 - config.monitor_window].total;
    const double monitored =
        window_sum / static_cast<double>(std::min(result.log.size(), config.monitor_window));
    if (monitored < result.best_loss) {
      result.best_loss = monitored;
      result.best_epoch = epoch;
      best.assign(params);
    } else if (epoch - result.best_epoch >= config.patience && epoch >= config.min_epochs) {
      result.stopped_early = true;
      break;
    }

    adam.zero_grad();
    loss.backward();
    adam.step();
  }

  params.assign(best);
  result.embeddings = to_matrix(forward(params, graph, input));
  result.params = std::move(params);
  return result;
}

double separation_gap(const Matrix& embeddings, std::span<const NodeId> top,
                      std::span<const NodeId> nontop) {
  if (top.empty() || nontop.empty()) throw Error("separation_gap needs nonempty top and non-top sets");
  const auto d = embeddings.cols;
  std::vector<double> center(d, 0.0);
  for (std::size_t r = 0; r < embeddings.rows; ++r)
    for (std::size_t c = 0; c < d; ++c) center[c] += embeddings(r, c);
  for (auto& v : center) v /= static_cast<double>(embeddings.rows);

  auto centered = [&](NodeId n) {
    std::vector<double> row(d);
    for (std::size_t c = 0; c < d; ++c) row[c] = embeddings(n, c) - center[c];
    return row;
  };
  std::vector<double> proto(d, 0.0);
  for (const NodeId n : top) {
    const auto row = centered(n);
    for (std::size_t c = 0; c < d; ++c) proto[c] += row[c];
  }
  for (auto& v : proto) v /= static_cast<double>(top.size());

  auto cosine = [&](const std::vector<double>& a) {
    double ab = 0.0, aa = 0.0, bb = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      ab += a[c] * proto[c];
      aa += a[c] * a[c];
      bb += proto[c] * proto[c];
    }
    const double denom = std::sqrt(aa) * std::sqrt(bb);
    return denom > 0.0 ? ab / denom : 0.0;
  };
  auto mean_cosine = [&](std::span<const NodeId> nodes) {
    double total = 0.0;
    for (const NodeId n : nodes) total += cosine(centered(n));
    return total / static_cast<double>(nodes.size());
  };
  return mean_cosine(top) - mean_cosine(nontop);
}

}  // namespace licap
