#include <doctest.h>

#include <cmath>
#include <random>

#include "licap/adam.hpp"
#include "licap/error.hpp"
#include "licap/tensor.hpp"

using namespace licap;

namespace {

Tensor random_tensor(Shape s, std::mt19937_64& rng, bool grad = true) {
  std::normal_distribution<double> d(0.0, 1.0);
  std::vector<double> v(s.size());
  for (auto& x : v) x = d(rng);
  return Tensor::from(s, v, grad);
}

std::vector<double> vec(const Tensor& t) { return {t.values().begin(), t.values().end()}; }
std::vector<double> grad(const Tensor& t) { return {t.grad().begin(), t.grad().end()}; }

}  // namespace

TEST_CASE("matmul") {
  const auto eye = Tensor::from({2, 2}, {1, 0, 0, 1});
  const auto x = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
  CHECK(vec(matmul(eye, x)) == vec(x));
  const auto a = Tensor::from({2, 2}, {1, 2, 3, 4});
  const auto b = Tensor::from({2, 1}, {5, 6});
  const auto c = matmul(a, b);
  CHECK(c.shape() == Shape{2, 1});
  CHECK(vec(c) == std::vector<double>{17, 39});
  try {
    matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 2}));
    FAIL("expected a shape error");
  } catch (const Error& e) {
    const std::string msg = e.what();
    CHECK(msg.find("2x3") != std::string::npos);
    CHECK(msg.find("2x2") != std::string::npos);
  }
}

TEST_CASE("segment_softmax examples") {
  const std::vector<std::size_t> one_seg{0};
  CHECK(segment_softmax(Tensor::from({1, 1}, {3.7}), one_seg, 1).item() == 1.0);

  const std::vector<std::size_t> four{0, 0, 0, 0};
  const auto eq = segment_softmax(Tensor::from({4, 1}, {2, 2, 2, 2}), four, 1);
  for (double v : eq.values()) CHECK(v == doctest::Approx(0.25).epsilon(1e-15));

  const std::vector<std::size_t> two{0, 0};
  const auto s = segment_softmax(Tensor::from({2, 1}, {0.0, std::log(3.0)}), two, 1);
  CHECK(s.at(0, 0) == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(s.at(1, 0) == doctest::Approx(0.75).epsilon(1e-14));
}

TEST_CASE("segment_softmax sums to one and ignores shifts") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t segs = 1 + rng() % 10;
    const std::size_t e = segs + rng() % 40;
    std::vector<std::size_t> seg(e);
    for (std::size_t i = 0; i < e; ++i) seg[i] = i < segs ? i : rng() % segs;
    std::uniform_real_distribution<double> u(-30.0, 30.0);
    std::vector<double> logits(e), shifted(e);
    std::vector<double> shift(segs);
    for (auto& s : shift) s = u(rng);
    for (std::size_t i = 0; i < e; ++i) {
      logits[i] = u(rng);
      shifted[i] = logits[i] + shift[seg[i]];
    }
    const auto a = segment_softmax(Tensor::from({e, 1}, logits), seg, segs);
    const auto b = segment_softmax(Tensor::from({e, 1}, shifted), seg, segs);
    std::vector<double> totals(segs, 0.0);
    for (std::size_t i = 0; i < e; ++i) {
      totals[seg[i]] += a.values()[i];
      CHECK(std::abs(a.values()[i] - b.values()[i]) <= 1e-12);
    }
    for (double t : totals) CHECK(std::abs(t - 1.0) <= 1e-12);
  }
}

TEST_CASE("attention_softmax equals segment_softmax of leaky(d[seg] + r)") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t segs = 1 + rng() % 8;
    const std::size_t e = segs + rng() % 30;
    std::vector<std::size_t> seg(e);
    for (std::size_t i = 0; i < e; ++i) seg[i] = i < segs ? i : rng() % segs;
    const auto d = random_tensor({segs, 1}, rng, false);
    const auto r = random_tensor({e, 1}, rng, false);
    const auto ref = segment_softmax(leaky_relu(add(gather_rows(d, seg), r), 0.2), seg, segs);
    const auto got = attention_softmax(d, r, seg, 0.2);
    std::vector<double> totals(segs, 0.0);
    for (std::size_t i = 0; i < e; ++i) {
      CHECK(std::abs(got.values()[i] - ref.values()[i]) <= 1e-12);
      totals[seg[i]] += got.values()[i];
    }
    for (double t : totals) CHECK(std::abs(t - 1.0) <= 1e-12);
  }
  const std::vector<std::size_t> bad{0, 2};
  CHECK_THROWS_AS(attention_softmax(Tensor::zeros({2, 1}), Tensor::zeros({2, 1}), bad, 0.2), Error);
  CHECK_THROWS_AS(attention_softmax(Tensor::zeros({2, 2}), Tensor::zeros({2, 1}), bad, 0.2), Error);
}

TEST_CASE("softmax_cross_entropy matches logsumexp minus target and keeps tiny losses") {
  const auto x = Tensor::from({2, 3}, {1.0, 2.0, 3.0, -1.0, 0.5, 4.0});
  const std::vector<std::size_t> t{0, 2};
  const auto ce = softmax_cross_entropy(x, t);
  const auto lse = logsumexp_rows(x);
  CHECK(ce.at(0, 0) == doctest::Approx(lse.at(0, 0) - 1.0).epsilon(1e-14));
  CHECK(ce.at(1, 0) == doctest::Approx(lse.at(1, 0) - 4.0).epsilon(1e-14));

  // log(1 + e^-40) ~ e^-40: the naive difference rounds to zero.
  const std::vector<std::size_t> first{0};
  const auto tiny = softmax_cross_entropy(Tensor::from({1, 2}, {40.0, 0.0}), first);
  CHECK(tiny.item() == doctest::Approx(std::exp(-40.0)).epsilon(1e-12));
  CHECK_THROWS_AS(softmax_cross_entropy(x, first), Error);
  const std::vector<std::size_t> out_of_range{0, 3};
  CHECK_THROWS_AS(softmax_cross_entropy(x, out_of_range), Error);
}

TEST_CASE("leaky_relu values and subgradient at zero") {
  const auto x = Tensor::from({1, 3}, {2.0, -1.0, 0.0}, true);
  const auto y = leaky_relu(x, 0.2);
  CHECK(vec(y) == std::vector<double>{2.0, -0.2, 0.0});
  sum(y).backward();
  CHECK(grad(x) == std::vector<double>{1.0, 0.2, 0.2});
  CHECK_THROWS_AS(leaky_relu(x, 1.0), Error);
  CHECK_THROWS_AS(leaky_relu(x, 0.0), Error);
}

TEST_CASE("element-wise suite") {
  CHECK(dot(Tensor::from({2, 1}, {1, 0}), Tensor::from({2, 1}, {0, 1})).item() == 0.0);
  CHECK(log(exp(Tensor::scalar(1.5))).item() == doctest::Approx(1.5).epsilon(1e-15));
  const std::vector<std::size_t> rows{0, 1};
  CHECK(vec(mean_rows(Tensor::from({2, 2}, {2, 4, 4, 8}), rows)) == std::vector<double>{3, 6});
  CHECK_THROWS_AS(add(Tensor::zeros({2, 1}), Tensor::zeros({1, 2})), Error);

  const Tensor parts[] = {Tensor::from({2, 1}, {1, 2}), Tensor::from({2, 2}, {3, 4, 5, 6})};
  CHECK(vec(concat_cols(parts)) == std::vector<double>{1, 3, 4, 2, 5, 6});
  const Tensor stack[] = {Tensor::from({1, 2}, {1, 2}), Tensor::from({2, 2}, {3, 4, 5, 6})};
  const auto rs = concat_rows(stack);
  CHECK(rs.shape() == Shape{3, 2});
  CHECK(vec(rs) == std::vector<double>{1, 2, 3, 4, 5, 6});

  const auto lse = logsumexp_rows(Tensor::from({2, 2}, {1000, 1000, 0, std::log(3.0)}));
  CHECK(lse.at(0, 0) == doctest::Approx(1000 + std::log(2.0)));
  CHECK(lse.at(1, 0) == doctest::Approx(std::log(4.0)));
}

TEST_CASE("backward examples") {
  const auto x = Tensor::from({1, 1}, {3.0}, true);
  dot(x, x).backward();
  CHECK(grad(x) == std::vector<double>{6.0});

  const auto a = Tensor::from({1, 2}, {1, 2});
  const auto v = Tensor::from({2, 1}, {0.3, -0.7}, true);
  const auto unused = Tensor::from({2, 1}, {1, 1}, true);
  sum(matmul(a, v)).backward();
  CHECK(grad(v) == std::vector<double>{1, 2});
  CHECK(grad(unused) == std::vector<double>{0, 0});

  CHECK_THROWS_AS(matmul(v, a).backward(), Error);
  CHECK_THROWS_AS(add(v, v).backward(), Error);
}

TEST_CASE("leaf gradients accumulate until cleared") {
  auto x = Tensor::from({1, 1}, {2.0}, true);
  const auto loss = scale(x, 3.0);
  loss.backward();
  loss.backward();
  CHECK(grad(x) == std::vector<double>{6.0});
  x.zero_grad();
  loss.backward();
  CHECK(grad(x) == std::vector<double>{3.0});
}

TEST_CASE("fan-out sums adjoint contributions") {
  std::mt19937_64 rng(2);
  auto x = random_tensor({3, 2}, rng);
  auto w = random_tensor({2, 2}, rng);
  Tensor inputs[] = {x, w};
  // x feeds three consumers: a matmul, an element-wise product with itself,
  // and a row mean.
  const std::vector<std::size_t> rows{0, 2};
  auto f = [&] {
    const auto h = matmul(x, w);
    const auto sq = mul(x, x);
    const auto m = mean_rows(x, rows);
    return add(add(sum(mul(h, h)), sum(sq)), sum(exp(m)));
  };
  CHECK(grad_check(f, inputs, 1e-6) < 1e-7);
}

TEST_CASE("grad_check reference cases") {
  std::mt19937_64 rng(9);
  auto x = random_tensor({4, 3}, rng);
  Tensor in[] = {x};
  CHECK(grad_check([&] { return sum(mul(x, x)); }, in, 1e-6) < 1e-7);
  CHECK(grad_check([&] { return sum(scale(x, 2.5)); }, in, 1e-6) < 1e-9);
  CHECK(grad_check([&] { return Tensor::scalar(4.0); }, in, 1e-6) == 0.0);
}

TEST_CASE("every primitive passes grad_check") {
  std::mt19937_64 rng(17);
  auto a = random_tensor({4, 3}, rng);
  auto b = random_tensor({4, 3}, rng);
  auto w = random_tensor({3, 2}, rng);
  auto row = random_tensor({1, 3}, rng);
  auto col = random_tensor({4, 1}, rng);
  Tensor all[] = {a, b, w, row, col};
  const std::vector<std::size_t> seg{0, 1, 1, 2};
  const std::vector<std::size_t> pick_cols{2, 0, 1, 1};
  const std::vector<std::size_t> gather{3, 0, 0, 2, 1};
  auto probe = [](const Tensor& t) {
    // Weighted sum so that every output coordinate matters differently.
    std::vector<double> coef(t.size());
    for (std::size_t i = 0; i < coef.size(); ++i) coef[i] = 0.3 + 0.17 * static_cast<double>(i % 7);
    return sum(mul(t, Tensor::from(t.shape(), coef)));
  };
  const std::vector<std::function<Tensor()>> cases{
      [&] { return probe(matmul(a, w)); },
      [&] { return probe(transpose(a)); },
      [&] { return probe(sub(mul(a, b), a)); },
      [&] { return probe(add_scalar(scale(a, -1.5), 2.0)); },
      [&] { return probe(exp(a)); },
      [&] { return probe(log(add_scalar(mul(a, a), 1.0))); },
      [&] { return probe(leaky_relu(a, 0.2)); },
      [&] { return probe(add_row(a, row)); },
      [&] { return dot(col, col); },
      [&] { return probe(mean_rows(a, seg)); },
      [&] { return probe(logsumexp_rows(a)); },
      [&] { return probe(gather_rows(a, gather)); },
      [&] { return probe(pick(a, pick_cols)); },
      [&] { const Tensor p[] = {a, b}; return probe(concat_cols(p)); },
      [&] { const Tensor p[] = {a, row}; return probe(concat_rows(p)); },
      [&] { return probe(segment_softmax(col, seg, 3)); },
      [&] { return probe(softmax_cross_entropy(a, pick_cols)); },
      [&] {
        const auto d = gather_rows(col, std::vector<std::size_t>{0, 1, 2});
        return probe(attention_softmax(d, mul(col, col), seg, 0.2));
      },
      [&] { return probe(scale_rows(a, col)); },
      [&] { return probe(scatter_add_rows(a, seg, 3)); },
  };
  for (std::size_t i = 0; i < cases.size(); ++i) {
    CAPTURE(i);
    CHECK(grad_check(cases[i], all, 1e-6) < 1e-6);
  }
}

TEST_CASE("detach cuts the graph") {
  const auto x = Tensor::from({1, 1}, {2.0}, true);
  const auto y = mul(x, x).detach();
  CHECK_FALSE(y.requires_grad());
  CHECK(y.item() == 4.0);
}

TEST_CASE("adam first step moves by the learning rate") {
  const auto p = Tensor::from({1, 3}, {1.0, -2.0, 0.5}, true);
  Adam adam({p}, AdamOptions{0.01});
  sum(mul(p, Tensor::from({1, 3}, {3.0, -0.5, 1e-3}))).backward();
  adam.step();
  CHECK(p.values()[0] == doctest::Approx(1.0 - 0.01).epsilon(1e-6));
  CHECK(p.values()[1] == doctest::Approx(-2.0 + 0.01).epsilon(1e-6));
  CHECK(p.values()[2] == doctest::Approx(0.5 - 0.01).epsilon(1e-4));
  CHECK(adam.steps() == 1);
}

TEST_CASE("adam with zero gradients leaves parameters alone") {
  const auto p = Tensor::from({2, 1}, {0.25, -4.0}, true);
  Adam adam({p});
  for (int i = 0; i < 10; ++i) {
    adam.zero_grad();
    adam.step();
  }
  CHECK(vec(p) == std::vector<double>{0.25, -4.0});
}

TEST_CASE("adam is deterministic") {
  auto run = [] {
    const auto p = Tensor::from({1, 1}, {3.0}, true);
    Adam adam({p}, AdamOptions{0.1});
    for (int i = 0; i < 50; ++i) {
      adam.zero_grad();
      const auto d = add_scalar(p, -1.0);
      mul(d, d).backward();
      adam.step();
    }
    return p.item();
  };
  const double a = run();
  CHECK(a == run());
  CHECK(std::abs(a - 1.0) < 0.5);
}

TEST_CASE("adam rejects non-finite gradients without touching parameters") {
  const auto p = Tensor::from({1, 2}, {1.0, 1.0}, true);
  const auto q = Tensor::from({1, 1}, {-1.0}, true);
  Adam adam({q, p});
  sum(scale(q, 2.0)).backward();
  sum(mul(p, Tensor::from({1, 2}, {std::nan(""), 1.0}))).backward();
  CHECK_THROWS_AS(adam.step(), Error);
  CHECK(vec(p) == std::vector<double>{1.0, 1.0});
  CHECK(vec(q) == std::vector<double>{-1.0});
  CHECK(adam.steps() == 0);
}
