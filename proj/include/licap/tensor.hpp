#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace licap {

/// Row-major 2-D shape; vectors are n x 1, scalars 1 x 1.
struct Shape {
  std::size_t rows = 0;
  std::size_t cols = 0;

  std::size_t size() const noexcept { return rows * cols; }
  bool operator==(const Shape&) const = default;
  std::string str() const;
};

namespace detail {
struct TensorNode;
}

/// Dense 64-bit tensor that records the operations producing it so that
/// `backward()` can fill gradients of every leaf marked `requires_grad`.
///
/// Tensors are cheap handles: copies share storage and graph history. A graph
/// must stay on the thread that built it.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const noexcept { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rows() const { return shape().rows; }
  std::size_t cols() const { return shape().cols; }
  std::size_t size() const { return shape().size(); }

  std::span<const double> values() const;
  /// Writable storage. Only meant for leaves (optimizers, finite differences).
  std::span<double> mutable_values();
  double at(std::size_t r, std::size_t c) const;
  double item() const;

  bool requires_grad() const;
  /// Gradient buffer; all zeros until a backward pass reaches this tensor.
  std::span<const double> grad() const;
  void zero_grad();

  /// Reverse pass from a 1x1 tensor. Leaf gradients accumulate across calls.
  void backward() const;

  /// Same values, no history, no gradient.
  Tensor detach() const;

  const char* op() const;

 private:
  friend struct TensorAccess;
  explicit Tensor(std::shared_ptr<detail::TensorNode> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::TensorNode> node_;
};

// Linear algebra
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& x);

// Element-wise (identical shapes)
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);
Tensor add_scalar(const Tensor& x, double offset);
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);
Tensor leaky_relu(const Tensor& x, double slope = 0.2);

/// Adds a 1 x cols row vector to every row.
Tensor add_row(const Tensor& x, const Tensor& row);

// Reductions
Tensor sum(const Tensor& x);
Tensor dot(const Tensor& a, const Tensor& b);
/// Mean of the selected rows, 1 x cols.
Tensor mean_rows(const Tensor& x, std::span<const std::size_t> rows);
/// Row-wise log-sum-exp (max-shifted), rows x 1.
Tensor logsumexp_rows(const Tensor& x);
/// out[r] = logsumexp(x[r, :]) - x[r, target[r]], rows x 1. Uses log1p when the
/// target holds the row maximum so small losses keep full relative precision.
Tensor softmax_cross_entropy(const Tensor& x, std::span<const std::size_t> target);

// Indexing
Tensor gather_rows(const Tensor& x, std::span<const std::size_t> rows);
/// out[r] = x[r, cols[r]], rows x 1.
Tensor pick(const Tensor& x, std::span<const std::size_t> cols);
Tensor concat_cols(std::span<const Tensor> parts);
Tensor concat_rows(std::span<const Tensor> parts);

// Segment operations over entries grouped by an id (graph neighborhoods)
/// Softmax of an E x 1 tensor within each segment.
Tensor segment_softmax(const Tensor& logits, std::span<const std::size_t> segments,
                       std::size_t segment_count);
/// Graph attention weights: entry e gets softmax over its segment of
/// LeakyReLU(node_scores[segments[e]] + entry_scores[e]). node_scores is
/// segment_count x 1, entry_scores E x 1. Differences between logits that sit
/// on the same side of the kink are taken on entry_scores alone, so the
/// per-segment shift cancels exactly.
Tensor attention_softmax(const Tensor& node_scores, const Tensor& entry_scores,
                         std::span<const std::size_t> segments, double slope);
/// Multiplies row e of x (E x F) by weights[e] (E x 1).
Tensor scale_rows(const Tensor& x, const Tensor& weights);
/// out[s] = sum of rows e of x with segments[e] == s; segment_count x F.
Tensor scatter_add_rows(const Tensor& x, std::span<const std::size_t> segments,
                        std::size_t segment_count);

/// Central finite differences against `backward()` for every coordinate of
/// every tensor in `inputs`. Per-coordinate error is
/// |a - b| / max(|a|, |b|, 1e-8); returns the maximum. `f` must rebuild its
/// graph from the current input values on every call.
double grad_check(const std::function<Tensor()>& f, std::span<Tensor> inputs, double eps = 1e-6);

}  // namespace licap
