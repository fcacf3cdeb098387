#pragma once

#include <cstddef>
#include <vector>

#include "licap/tensor.hpp"

namespace licap {

struct AdamOptions {
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Bias-corrected Adam over a fixed list of leaf tensors.
class Adam {
 public:
  Adam(std::vector<Tensor> params, AdamOptions options = {});

  /// Applies one update from the parameters' current gradients. Throws on a
  /// non-finite gradient and leaves every parameter untouched in that case.
  void step();
  void zero_grad();

  std::size_t steps() const noexcept { return t_; }
  const AdamOptions& options() const noexcept { return options_; }
  const std::vector<Tensor>& params() const noexcept { return params_; }
  const std::vector<double>& first_moment(std::size_t i) const { return m_.at(i); }
  const std::vector<double>& second_moment(std::size_t i) const { return v_.at(i); }

 private:
  std::vector<Tensor> params_;
  AdamOptions options_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  std::size_t t_ = 0;
};

}  // namespace licap
