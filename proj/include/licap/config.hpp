#pragma once

#include <cstddef>
#include <cstdint>
#include <istream>
#include <string>
#include <vector>

#include "licap/downstream.hpp"
#include "licap/pretrain.hpp"

namespace licap {

/// Everything a CLI run needs. Values start at defaults, are overwritten by
/// the config file, then by command-line flags.
///
/// Config files are flat `key = value` lines grouped in sections:
///
///     [paths]       graph, labels, features, out
///     [pretrain]    gamma, bin_width, eta1, eta2, tau, k_neg, epochs, patience,
///                   min_epochs, learning_rate, seed, variant, encoder,
///                   hidden_dim, heads, predicate_dim, layers, negative_slope
///     [downstream]  model, hidden_dim, epochs, learning_rate
///     [eval]        k, folds, seed
///     [run]         skip_pretrain, compare
///
/// Lines starting with `#` or `;` are comments. Unknown keys are errors.
struct ExperimentConfig {
  std::string graph_path;
  std::string labels_path;
  std::string features_path;
  std::string output_path;
  PretrainConfig pretrain;
  DownstreamConfig downstream;
  std::vector<std::size_t> ks{10, 50};
  std::size_t folds = 5;
  std::uint64_t eval_seed = 0;
  bool skip_pretrain = false;
  bool compare = false;
};

void apply_config(ExperimentConfig& config, std::istream& in);
void apply_config_file(ExperimentConfig& config, const std::string& path);

/// "10,50,100" -> {10, 50, 100}.
std::vector<std::size_t> parse_k_list(const std::string& text);

}  // namespace licap
