#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "licap/binning.hpp"
#include "licap/kg.hpp"
#include "licap/pregat.hpp"
#include "licap/tensor.hpp"

namespace licap {

enum class Variant { full, l1_only, l2_only, random_sampling };

Variant parse_variant(const std::string& text);
std::string to_string(Variant v);
EncoderMode parse_encoder(const std::string& text);
std::string to_string(EncoderMode m);

struct PretrainConfig {
  double gamma = 0.1;
  double bin_width = 1.0;
  double eta1 = 1.0;
  double eta2 = 1.0;
  double tau = 0.05;
  double k_neg = 0.05;
  std::size_t epochs = 200;
  std::size_t patience = 20;
  std::size_t min_epochs = 50;
  /// Early stopping tracks the mean total loss over this many trailing epochs.
  std::size_t monitor_window = 10;
  double learning_rate = 0.005;
  std::uint64_t seed = 0;
  Variant variant = Variant::full;

  EncoderMode encoder = EncoderMode::pregat;
  std::size_t hidden_dim = 8;
  std::size_t heads = 8;
  std::size_t predicate_dim = 10;
  std::size_t layers = 1;
  double negative_slope = 0.2;

  void validate() const;
};

/// One negative set shared by all anchors of an epoch:
/// max(1, ceil(k_neg * |nontop|)) nodes drawn without replacement.
std::vector<NodeId> sample_negatives(std::span<const NodeId> nontop, double k_neg,
                                     std::mt19937_64& rng);

/// Top-vs-non-top InfoNCE:
///   sum_{i in top} -log( e^{h_i.c/tau} / (e^{h_i.c/tau} + sum_j e^{h_i.h_j/tau}) ).
Tensor loss_l1(const Tensor& embeddings, std::span<const NodeId> top, const Tensor& top_prototype,
               std::span<const NodeId> negatives, double tau);

/// Order-keeping loss over the finer bins, with beta scaling each logit in
/// the denominator:
///   sum_m sum_{i in bin_m} -log( e^{h_i.c_m/tau} / sum_n e^{beta_mn h_i.c_n/tau} ).
/// `prototypes` is B x D, row m the prototype of bin m.
Tensor loss_l2(const Tensor& embeddings, const std::vector<std::vector<NodeId>>& bins,
               const Tensor& prototypes, const Matrix& beta, double tau);

Tensor total_loss(const Tensor& l1, const Tensor& l2, double eta1, double eta2);

struct EpochRecord {
  std::size_t epoch = 0;
  double l1 = 0.0;
  double l2 = 0.0;
  double total = 0.0;
};

struct PretrainResult {
  Matrix embeddings;
  std::vector<EpochRecord> log;
  std::size_t best_epoch = 0;
  /// Best trailing-window mean of the total loss.
  double best_loss = 0.0;
  bool stopped_early = false;
  PreGatParams params;
  /// Positive set actually used (the random set for `random_sampling`).
  std::vector<NodeId> top_nodes;
  std::vector<NodeId> nontop_nodes;
  std::vector<std::vector<NodeId>> finer_bins;
};

/// Full pretraining run. `kg` may be raw or already augmented.
PretrainResult pretrain(const KnowledgeGraph& kg, const FeatureMatrix& features,
                        const LabelSet& labels, const PretrainConfig& config);

/// Mean cosine similarity to the top prototype of top rows minus that of
/// non-top rows, after centering every row on the all-node mean.
double separation_gap(const Matrix& embeddings, std::span<const NodeId> top,
                      std::span<const NodeId> nontop);

Tensor to_tensor(const Matrix& m, bool requires_grad = false);
Matrix to_matrix(const Tensor& t);

}  // namespace licap
