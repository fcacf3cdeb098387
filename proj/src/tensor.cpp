#include "licap/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_set>

#include "licap/error.hpp"

namespace licap {

std::string Shape::str() const {
  return "[" + std::to_string(rows) + "x" + std::to_string(cols) + "]";
}

namespace detail {

struct TensorNode {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<TensorNode>> parents;
  std::function<void(TensorNode&)> backward;

  bool is_leaf() const { return parents.empty(); }

  std::vector<double>& grad_buffer() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
    return grad;
  }
};

}  // namespace detail

using detail::TensorNode;

struct TensorAccess {
  static const std::shared_ptr<TensorNode>& node(const Tensor& t) {
    if (!t.node_) throw Error("use of an undefined tensor");
    return t.node_;
  }
  static Tensor wrap(std::shared_ptr<TensorNode> n) { return Tensor(std::move(n)); }
};

namespace {

using NodePtr = std::shared_ptr<TensorNode>;

const NodePtr& node_of(const Tensor& t) { return TensorAccess::node(t); }

Tensor make_leaf(Shape shape, std::vector<double> values, bool requires_grad) {
  if (values.size() != shape.size())
    throw Error("tensor buffer of " + std::to_string(values.size()) + " values does not fit shape " +
                shape.str());
  auto n = std::make_shared<TensorNode>();
  n->shape = shape;
  n->value = std::move(values);
  n->requires_grad = requires_grad;
  return TensorAccess::wrap(std::move(n));
}

// Builds an interior node. History is kept only when some input needs a
// gradient.
Tensor make_result(Shape shape, std::vector<double> values, const char* op,
                   std::vector<NodePtr> parents, std::function<void(TensorNode&)> backward) {
  auto n = std::make_shared<TensorNode>();
  n->shape = shape;
  n->value = std::move(values);
  n->op = op;
  const bool needs = std::any_of(parents.begin(), parents.end(),
                                 [](const NodePtr& p) { return p->requires_grad; });
  if (needs) {
    n->requires_grad = true;
    n->parents = std::move(parents);
    n->backward = std::move(backward);
  }
  return TensorAccess::wrap(std::move(n));
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw Error(std::string(op) + ": shape mismatch " + a.shape().str() + " vs " + b.shape().str());
}

template <typename Forward, typename Derivative>
Tensor unary(const Tensor& x, const char* op, Forward f, Derivative df) {
  const auto& xn = node_of(x);
  std::vector<double> out(xn->value.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(xn->value[i]);
  return make_result(xn->shape, std::move(out), op, {xn}, [df](TensorNode& self) {
    auto& p = *self.parents[0];
    auto& g = p.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * df(p.value[i], self.value[i]);
  });
}

void check_index(std::size_t index, std::size_t bound, const char* op) {
  if (index >= bound)
    throw Error(std::string(op) + ": index " + std::to_string(index) + " out of range " +
                std::to_string(bound));
}

}  // namespace

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return make_leaf(shape, std::vector<double>(shape.size(), 0.0), requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  return make_leaf(shape, std::vector<double>(shape.size(), value), requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  return make_leaf(shape, std::move(values), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return make_leaf({1, 1}, {value}, requires_grad);
}

const Shape& Tensor::shape() const { return node_of(*this)->shape; }

std::span<const double> Tensor::values() const { return node_of(*this)->value; }

std::span<double> Tensor::mutable_values() { return node_of(*this)->value; }

double Tensor::at(std::size_t r, std::size_t c) const {
  const auto& n = node_of(*this);
  if (r >= n->shape.rows || c >= n->shape.cols) throw Error("tensor index out of range");
  return n->value[r * n->shape.cols + c];
}

double Tensor::item() const {
  if (size() != 1) throw Error("item() on non-scalar tensor " + shape().str());
  return node_of(*this)->value[0];
}

bool Tensor::requires_grad() const { return node_of(*this)->requires_grad; }

std::span<const double> Tensor::grad() const { return node_of(*this)->grad_buffer(); }

void Tensor::zero_grad() {
  auto& n = node_of(*this);
  n->grad.assign(n->value.size(), 0.0);
}

const char* Tensor::op() const { return node_of(*this)->op; }

Tensor Tensor::detach() const { return make_leaf(shape(), node_of(*this)->value, false); }

void Tensor::backward() const {
  const auto& root = node_of(*this);
  if (root->shape.size() != 1)
    throw Error("backward() requires a scalar loss, got shape " + root->shape.str());
  if (!root->requires_grad) return;

  // Iterative post-order DFS; reversed it is a topological order.
  std::vector<TensorNode*> order;
  std::unordered_set<TensorNode*> visited;
  std::vector<std::pair<TensorNode*, std::size_t>> stack{{root.get(), 0}};
  visited.insert(root.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      TensorNode* p = n->parents[next++].get();
      if (p->requires_grad && visited.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  for (TensorNode* n : order) {
    if (!n->is_leaf()) n->grad.assign(n->value.size(), 0.0);
  }
  root->grad_buffer()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    TensorNode* n = *it;
    if (n->backward) n->backward(*n);
  }
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  const auto& an = node_of(a);
  const auto& bn = node_of(b);
  const auto [m, k] = an->shape;
  const auto [k2, n] = bn->shape;
  if (k != k2)
    throw Error("matmul: inner dimensions disagree, " + an->shape.str() + " x " + bn->shape.str());
  std::vector<double> out(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      const double av = an->value[i * k + p];
      for (std::size_t j = 0; j < n; ++j) out[i * n + j] += av * bn->value[p * n + j];
    }
  return make_result({m, n}, std::move(out), "matmul", {an, bn}, [m, k, n](TensorNode& self) {
    auto& A = *self.parents[0];
    auto& B = *self.parents[1];
    const auto& G = self.grad;
    if (A.requires_grad) {
      auto& ga = A.grad_buffer();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          double acc = 0.0;
          for (std::size_t j = 0; j < n; ++j) acc += G[i * n + j] * B.value[p * n + j];
          ga[i * k + p] += acc;
        }
    }
    if (B.requires_grad) {
      auto& gb = B.grad_buffer();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          const double av = A.value[i * k + p];
          for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += av * G[i * n + j];
        }
    }
  });
}

Tensor transpose(const Tensor& x) {
  const auto& xn = node_of(x);
  const auto [r, c] = xn->shape;
  std::vector<double> out(r * c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = xn->value[i * c + j];
  return make_result({c, r}, std::move(out), "transpose", {xn}, [r, c](TensorNode& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) g[i * c + j] += self.grad[j * r + i];
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  const auto& an = node_of(a);
  const auto& bn = node_of(b);
  std::vector<double> out(an->value.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = an->value[i] + bn->value[i];
  return make_result(an->shape, std::move(out), "add", {an, bn}, [](TensorNode& self) {
    for (auto& p : self.parents) {
      if (!p->requires_grad) continue;
      auto& g = p->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  const auto& an = node_of(a);
  const auto& bn = node_of(b);
  std::vector<double> out(an->value.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = an->value[i] - bn->value[i];
  return make_result(an->shape, std::move(out), "sub", {an, bn}, [](TensorNode& self) {
    const double sign[2] = {1.0, -1.0};
    for (std::size_t k = 0; k < 2; ++k) {
      auto& p = *self.parents[k];
      if (!p.requires_grad) continue;
      auto& g = p.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += sign[k] * self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  const auto& an = node_of(a);
  const auto& bn = node_of(b);
  std::vector<double> out(an->value.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = an->value[i] * bn->value[i];
  return make_result(an->shape, std::move(out), "mul", {an, bn}, [](TensorNode& self) {
    auto& A = *self.parents[0];
    auto& B = *self.parents[1];
    if (A.requires_grad) {
      auto& g = A.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * B.value[i];
    }
    if (B.requires_grad) {
      auto& g = B.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * A.value[i];
    }
  });
}

Tensor scale(const Tensor& x, double factor) {
  return unary(
      x, "scale", [factor](double v) { return v * factor; },
      [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& x, double offset) {
  return unary(
      x, "add_scalar", [offset](double v) { return v + offset; }, [](double, double) { return 1.0; });
}

Tensor exp(const Tensor& x) {
  return unary(
      x, "exp", [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& x) {
  return unary(
      x, "log", [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Tensor leaky_relu(const Tensor& x, double slope) {
  if (!(slope > 0.0 && slope < 1.0))
    throw Error("leaky_relu: slope must lie in (0, 1), got " + std::to_string(slope));
  return unary(
      x, "leaky_relu", [slope](double v) { return v > 0.0 ? v : slope * v; },
      [slope](double v, double) { return v > 0.0 ? 1.0 : slope; });
}

Tensor add_row(const Tensor& x, const Tensor& row) {
  const auto& xn = node_of(x);
  const auto& rn = node_of(row);
  if (rn->shape.rows != 1 || rn->shape.cols != xn->shape.cols)
    throw Error("add_row: row " + rn->shape.str() + " does not broadcast over " + xn->shape.str());
  const auto [r, c] = xn->shape;
  std::vector<double> out(xn->value);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] += rn->value[j];
  return make_result(xn->shape, std::move(out), "add_row", {xn, rn}, [r, c](TensorNode& self) {
    auto& X = *self.parents[0];
    auto& R = *self.parents[1];
    if (X.requires_grad) {
      auto& g = X.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (R.requires_grad) {
      auto& g = R.grad_buffer();
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) g[j] += self.grad[i * c + j];
    }
  });
}

Tensor sum(const Tensor& x) {
  const auto& xn = node_of(x);
  double total = 0.0;
  for (const double v : xn->value) total += v;
  return make_result({1, 1}, {total}, "sum", {xn}, [](TensorNode& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (auto& v : g) v += self.grad[0];
  });
}

Tensor dot(const Tensor& a, const Tensor& b) {
  const auto& an = node_of(a);
  const auto& bn = node_of(b);
  if (an->value.size() != bn->value.size())
    throw Error("dot: length mismatch " + an->shape.str() + " vs " + bn->shape.str());
  double total = 0.0;
  for (std::size_t i = 0; i < an->value.size(); ++i) total += an->value[i] * bn->value[i];
  return make_result({1, 1}, {total}, "dot", {an, bn}, [](TensorNode& self) {
    auto& A = *self.parents[0];
    auto& B = *self.parents[1];
    const double g0 = self.grad[0];
    if (A.requires_grad) {
      auto& g = A.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += g0 * B.value[i];
    }
    if (B.requires_grad) {
      auto& g = B.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += g0 * A.value[i];
    }
  });
}

Tensor mean_rows(const Tensor& x, std::span<const std::size_t> rows) {
  const auto& xn = node_of(x);
  if (rows.empty()) throw Error("mean_rows: empty row selection");
  const auto c = xn->shape.cols;
  std::vector<double> out(c, 0.0);
  for (const auto r : rows) {
    check_index(r, xn->shape.rows, "mean_rows");
    for (std::size_t j = 0; j < c; ++j) out[j] += xn->value[r * c + j];
  }
  const double inv = 1.0 / static_cast<double>(rows.size());
  for (auto& v : out) v *= inv;
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  return make_result({1, c}, std::move(out), "mean_rows", {xn},
                     [idx = std::move(idx), c, inv](TensorNode& self) {
                       auto& g = self.parents[0]->grad_buffer();
                       for (const auto r : idx)
                         for (std::size_t j = 0; j < c; ++j) g[r * c + j] += inv * self.grad[j];
                     });
}

Tensor logsumexp_rows(const Tensor& x) {
  const auto& xn = node_of(x);
  const auto [r, c] = xn->shape;
  if (c == 0) throw Error("logsumexp_rows: no columns");
  std::vector<double> out(r);
  for (std::size_t i = 0; i < r; ++i) {
    const double* row = xn->value.data() + i * c;
    const double m = *std::max_element(row, row + c);
    double acc = 0.0;
    for (std::size_t j = 0; j < c; ++j) acc += std::exp(row[j] - m);
    out[i] = m + std::log(acc);
  }
  return make_result({r, 1}, std::move(out), "logsumexp_rows", {xn}, [r, c](TensorNode& self) {
    auto& X = *self.parents[0];
    auto& g = X.grad_buffer();
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j)
        g[i * c + j] += self.grad[i] * std::exp(X.value[i * c + j] - self.value[i]);
  });
}

Tensor softmax_cross_entropy(const Tensor& x, std::span<const std::size_t> target) {
  const auto& xn = node_of(x);
  const auto [r, c] = xn->shape;
  if (target.size() != r)
    throw Error("softmax_cross_entropy: need one target per row, got " + std::to_string(target.size()) +
                " for " + xn->shape.str());
  std::vector<double> out(r);
  // Softmax probabilities, kept for the backward pass.
  std::vector<double> prob(r * c);
  for (std::size_t i = 0; i < r; ++i) {
    check_index(target[i], c, "softmax_cross_entropy");
    const double* row = xn->value.data() + i * c;
    double* p = prob.data() + i * c;
    const double t = row[target[i]];
    const double m = *std::max_element(row, row + c);
    double rest = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      p[j] = std::exp(row[j] - m);
      if (j != target[i]) rest += p[j];
    }
    const double head = p[target[i]];
    out[i] = t == m ? std::log1p(rest) : (m - t) + std::log(head + rest);
    const double total = head + rest;
    for (std::size_t j = 0; j < c; ++j) p[j] /= total;
    // 1 - p_t, summed from the small terms so it stays accurate near zero.
    p[target[i]] = -rest / total;
  }
  return make_result({r, 1}, std::move(out), "softmax_cross_entropy", {xn},
                     [prob = std::move(prob), r, c](TensorNode& self) {
                       auto& g = self.parents[0]->grad_buffer();
                       for (std::size_t i = 0; i < r; ++i)
                         for (std::size_t j = 0; j < c; ++j) g[i * c + j] += self.grad[i] * prob[i * c + j];
                     });
}

Tensor gather_rows(const Tensor& x, std::span<const std::size_t> rows) {
  const auto& xn = node_of(x);
  const auto c = xn->shape.cols;
  std::vector<double> out(rows.size() * c);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    check_index(rows[i], xn->shape.rows, "gather_rows");
    std::copy_n(xn->value.begin() + static_cast<std::ptrdiff_t>(rows[i] * c), c,
                out.begin() + static_cast<std::ptrdiff_t>(i * c));
  }
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  return make_result({rows.size(), c}, std::move(out), "gather_rows", {xn},
                     [idx = std::move(idx), c](TensorNode& self) {
                       auto& g = self.parents[0]->grad_buffer();
                       for (std::size_t i = 0; i < idx.size(); ++i)
                         for (std::size_t j = 0; j < c; ++j) g[idx[i] * c + j] += self.grad[i * c + j];
                     });
}

Tensor pick(const Tensor& x, std::span<const std::size_t> cols) {
  const auto& xn = node_of(x);
  const auto [r, c] = xn->shape;
  if (cols.size() != r)
    throw Error("pick: need one column per row, got " + std::to_string(cols.size()) + " for " +
                xn->shape.str());
  std::vector<double> out(r);
  for (std::size_t i = 0; i < r; ++i) {
    check_index(cols[i], c, "pick");
    out[i] = xn->value[i * c + cols[i]];
  }
  std::vector<std::size_t> idx(cols.begin(), cols.end());
  return make_result({r, 1}, std::move(out), "pick", {xn}, [idx = std::move(idx), c](TensorNode& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < idx.size(); ++i) g[i * c + idx[i]] += self.grad[i];
  });
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw Error("concat_cols: nothing to concatenate");
  const auto r = parts.front().rows();
  std::vector<NodePtr> parents;
  std::vector<std::size_t> offsets{0};
  for (const auto& t : parts) {
    if (t.rows() != r)
      throw Error("concat_cols: row mismatch " + parts.front().shape().str() + " vs " + t.shape().str());
    parents.push_back(node_of(t));
    offsets.push_back(offsets.back() + t.cols());
  }
  const auto c = offsets.back();
  std::vector<double> out(r * c);
  for (std::size_t k = 0; k < parents.size(); ++k) {
    const auto pc = parents[k]->shape.cols;
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < pc; ++j) out[i * c + offsets[k] + j] = parents[k]->value[i * pc + j];
  }
  return make_result({r, c}, std::move(out), "concat_cols", std::move(parents),
                     [offsets = std::move(offsets), r, c](TensorNode& self) {
                       for (std::size_t k = 0; k < self.parents.size(); ++k) {
                         auto& p = *self.parents[k];
                         if (!p.requires_grad) continue;
                         auto& g = p.grad_buffer();
                         const auto pc = p.shape.cols;
                         for (std::size_t i = 0; i < r; ++i)
                           for (std::size_t j = 0; j < pc; ++j)
                             g[i * pc + j] += self.grad[i * c + offsets[k] + j];
                       }
                     });
}

Tensor concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) throw Error("concat_rows: nothing to concatenate");
  const auto c = parts.front().cols();
  std::vector<NodePtr> parents;
  std::vector<double> out;
  std::size_t r = 0;
  for (const auto& t : parts) {
    r += t.rows();
    if (t.cols() != c)
      throw Error("concat_rows: column mismatch " + parts.front().shape().str() + " vs " + t.shape().str());
    parents.push_back(node_of(t));
    out.insert(out.end(), parents.back()->value.begin(), parents.back()->value.end());
  }
  return make_result({r, c}, std::move(out), "concat_rows", std::move(parents),
                     [](TensorNode& self) {
                       std::size_t offset = 0;
                       for (auto& p : self.parents) {
                         const auto n = p->value.size();
                         if (p->requires_grad) {
                           auto& g = p->grad_buffer();
                           for (std::size_t i = 0; i < n; ++i) g[i] += self.grad[offset + i];
                         }
                         offset += n;
                       }
                     });
}

Tensor segment_softmax(const Tensor& logits, std::span<const std::size_t> segments,
                       std::size_t segment_count) {
  const auto& xn = node_of(logits);
  if (xn->shape.cols != 1) throw Error("segment_softmax: logits must be a column, got " + xn->shape.str());
  const auto e = xn->shape.rows;
  if (segments.size() != e)
    throw Error("segment_softmax: " + std::to_string(segments.size()) + " segment ids for " +
                std::to_string(e) + " entries");
  std::vector<double> maxima(segment_count, -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < e; ++i) {
    check_index(segments[i], segment_count, "segment_softmax");
    maxima[segments[i]] = std::max(maxima[segments[i]], xn->value[i]);
  }
  std::vector<double> out(e);
  std::vector<double> totals(segment_count, 0.0);
  for (std::size_t i = 0; i < e; ++i) {
    out[i] = std::exp(xn->value[i] - maxima[segments[i]]);
    totals[segments[i]] += out[i];
  }
  for (std::size_t i = 0; i < e; ++i) out[i] /= totals[segments[i]];
  std::vector<std::size_t> seg(segments.begin(), segments.end());
  return make_result({e, 1}, std::move(out), "segment_softmax", {xn},
                     [seg = std::move(seg), segment_count](TensorNode& self) {
                       // dx_i = y_i (g_i - sum_{j in seg(i)} g_j y_j)
                       std::vector<double> inner(segment_count, 0.0);
                       for (std::size_t i = 0; i < seg.size(); ++i)
                         inner[seg[i]] += self.grad[i] * self.value[i];
                       auto& g = self.parents[0]->grad_buffer();
                       for (std::size_t i = 0; i < seg.size(); ++i)
                         g[i] += self.value[i] * (self.grad[i] - inner[seg[i]]);
                     });
}

Tensor attention_softmax(const Tensor& node_scores, const Tensor& entry_scores,
                         std::span<const std::size_t> segments, double slope) {
  const auto& dn = node_of(node_scores);
  const auto& rn = node_of(entry_scores);
  if (dn->shape.cols != 1 || rn->shape.cols != 1)
    throw Error("attention_softmax: scores must be columns, got " + dn->shape.str() + " and " +
                rn->shape.str());
  if (!(slope > 0.0 && slope < 1.0))
    throw Error("attention_softmax: slope must lie in (0, 1), got " + std::to_string(slope));
  const auto e = rn->shape.rows;
  const auto count = dn->shape.rows;
  if (segments.size() != e)
    throw Error("attention_softmax: " + std::to_string(segments.size()) + " segment ids for " +
                std::to_string(e) + " entries");
  const auto& d = dn->value;
  const auto& r = rn->value;
  std::vector<double> s(e);
  constexpr std::size_t none = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> top(count, none);
  for (std::size_t i = 0; i < e; ++i) {
    check_index(segments[i], count, "attention_softmax");
    s[i] = d[segments[i]] + r[i];
    auto& m = top[segments[i]];
    if (m == none || s[i] > s[m]) m = i;
  }
  auto leaky = [slope](double v) { return v > 0.0 ? v : slope * v; };
  std::vector<double> out(e);
  std::vector<double> totals(count, 0.0);
  for (std::size_t i = 0; i < e; ++i) {
    const std::size_t m = top[segments[i]];
    double diff;
    if (s[i] > 0.0 && s[m] > 0.0)
      diff = r[i] - r[m];
    else if (s[i] <= 0.0 && s[m] <= 0.0)
      diff = slope * (r[i] - r[m]);
    else
      diff = leaky(s[i]) - leaky(s[m]);
    out[i] = std::exp(diff);
    totals[segments[i]] += out[i];
  }
  for (std::size_t i = 0; i < e; ++i) out[i] /= totals[segments[i]];
  std::vector<std::size_t> seg(segments.begin(), segments.end());
  return make_result({e, 1}, std::move(out), "attention_softmax", {dn, rn},
                     [seg = std::move(seg), s = std::move(s), count, slope](TensorNode& self) {
                       std::vector<double> inner(count, 0.0);
                       for (std::size_t i = 0; i < seg.size(); ++i)
                         inner[seg[i]] += self.grad[i] * self.value[i];
                       auto& gd = self.parents[0]->grad_buffer();
                       auto& gr = self.parents[1]->grad_buffer();
                       for (std::size_t i = 0; i < seg.size(); ++i) {
                         const double gx = self.value[i] * (self.grad[i] - inner[seg[i]]);
                         const double gs = gx * (s[i] > 0.0 ? 1.0 : slope);
                         gr[i] += gs;
                         gd[seg[i]] += gs;
                       }
                     });
}

Tensor scale_rows(const Tensor& x, const Tensor& weights) {
  const auto& xn = node_of(x);
  const auto& wn = node_of(weights);
  const auto [r, c] = xn->shape;
  if (wn->shape.rows != r || wn->shape.cols != 1)
    throw Error("scale_rows: weights " + wn->shape.str() + " do not match rows of " + xn->shape.str());
  std::vector<double> out(r * c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = xn->value[i * c + j] * wn->value[i];
  return make_result(xn->shape, std::move(out), "scale_rows", {xn, wn}, [r, c](TensorNode& self) {
    auto& X = *self.parents[0];
    auto& W = *self.parents[1];
    if (X.requires_grad) {
      auto& g = X.grad_buffer();
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) g[i * c + j] += self.grad[i * c + j] * W.value[i];
    }
    if (W.requires_grad) {
      auto& g = W.grad_buffer();
      for (std::size_t i = 0; i < r; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < c; ++j) acc += self.grad[i * c + j] * X.value[i * c + j];
        g[i] += acc;
      }
    }
  });
}

Tensor scatter_add_rows(const Tensor& x, std::span<const std::size_t> segments,
                        std::size_t segment_count) {
  const auto& xn = node_of(x);
  const auto [r, c] = xn->shape;
  if (segments.size() != r)
    throw Error("scatter_add_rows: " + std::to_string(segments.size()) + " segment ids for " +
                std::to_string(r) + " rows");
  std::vector<double> out(segment_count * c, 0.0);
  for (std::size_t i = 0; i < r; ++i) {
    check_index(segments[i], segment_count, "scatter_add_rows");
    for (std::size_t j = 0; j < c; ++j) out[segments[i] * c + j] += xn->value[i * c + j];
  }
  std::vector<std::size_t> seg(segments.begin(), segments.end());
  return make_result({segment_count, c}, std::move(out), "scatter_add_rows", {xn},
                     [seg = std::move(seg), c](TensorNode& self) {
                       auto& g = self.parents[0]->grad_buffer();
                       for (std::size_t i = 0; i < seg.size(); ++i)
                         for (std::size_t j = 0; j < c; ++j) g[i * c + j] += self.grad[seg[i] * c + j];
                     });
}

double grad_check(const std::function<Tensor()>& f, std::span<Tensor> inputs, double eps) {
  if (!(eps > 0.0)) throw Error("grad_check: eps must be positive");
  for (auto& t : inputs) t.zero_grad();
  const Tensor loss = f();
  loss.backward();
  std::vector<std::vector<double>> analytic;
  for (const auto& t : inputs) analytic.emplace_back(t.grad().begin(), t.grad().end());

  double worst = 0.0;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    auto values = inputs[k].mutable_values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + eps;
      const double up = f().item();
      values[i] = saved - eps;
      const double down = f().item();
      values[i] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double a = analytic[k][i];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
      worst = std::max(worst, std::abs(a - numeric) / denom);
    }
  }
  for (auto& t : inputs) t.zero_grad();
  return worst;
}

}  // namespace licap
