#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "fixtures.hpp"
#include "licap/downstream.hpp"
#include "licap/error.hpp"
#include "licap/metrics.hpp"
#include "licap/synth.hpp"

using namespace licap;

namespace {

LabelSet labels_from_scores(const std::vector<double>& scores) {
  // score = ln(1 + raw)
  std::vector<std::pair<NodeId, double>> raw;
  for (std::size_t i = 0; i < scores.size(); ++i)
    raw.emplace_back(static_cast<NodeId>(i), std::expm1(scores[i]));
  return LabelSet::from_raw(raw);
}

double train_rmse(const NieModel& m, const Matrix& x, const LabelSet& labels,
                  const MessageGraph* g = nullptr) {
  const auto nodes = labels.nodes();
  const auto pred = predict(m, x, nodes, g);
  double se = 0.0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const double d = pred[i] - labels.score(nodes[i]);
    se += d * d;
  }
  return std::sqrt(se / static_cast<double>(nodes.size()));
}

// Independent PageRank oracle: solve (I - d M) p = (1 - d)/n + dangling share
// by Gaussian elimination on the dense system.
std::vector<double> pagerank_direct(std::size_t n, const std::vector<Edge>& edges, double d) {
  std::vector<double> out_deg(n, 0.0);
  for (const auto& e : edges) out_deg[e.head] += 1.0;
  std::vector<std::vector<double>> a(n, std::vector<double>(n + 1, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    a[i][i] = 1.0;
    a[i][n] = (1.0 - d) / static_cast<double>(n);
    for (std::size_t j = 0; j < n; ++j)
      if (out_deg[j] == 0.0) a[i][j] -= d / static_cast<double>(n);
  }
  for (const auto& e : edges) a[e.tail][e.head] -= d / out_deg[e.head];
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
    std::swap(a[c], a[piv]);
    for (std::size_t r = 0; r < n; ++r) {
      if (r == c) continue;
      const double f = a[r][c] / a[c][c];
      for (std::size_t k = c; k <= n; ++k) a[r][k] -= f * a[c][k];
    }
  }
  std::vector<double> p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = a[i][n] / a[i][i];
  return p;
}

}  // namespace

TEST_CASE("pagerank examples") {
  const auto cycle = fixtures::make_graph(2, 1, {{0, 0, 1}, {1, 0, 0}});
  const auto pc = pagerank(cycle);
  CHECK(pc[0] == doctest::Approx(0.5).epsilon(1e-10));
  CHECK(pc[1] == doctest::Approx(0.5).epsilon(1e-10));

  const auto star = fixtures::make_graph(3, 1, {{1, 0, 0}, {2, 0, 0}});
  const auto ps = pagerank(star);
  CHECK(ps[0] == doctest::Approx(27.0 / 47.0).epsilon(1e-9));
  CHECK(ps[1] == doctest::Approx(10.0 / 47.0).epsilon(1e-9));
  CHECK(std::abs(ps[0] - 0.5740) < 1e-3);
  CHECK(std::abs(ps[1] - 0.2130) < 1e-3);
}

TEST_CASE("pagerank matches a direct solve and ignores edge order") {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 2 + rng() % 20;
    auto edges = fixtures::random_edges(n, 2, rng() % (3 * n), rng);
    const auto p = pagerank(fixtures::make_graph(n, 2, edges));
    const auto ref = pagerank_direct(n, edges, 0.85);
    CHECK(std::abs(std::accumulate(p.begin(), p.end(), 0.0) - 1.0) <= 1e-10);
    for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(p[i] - ref[i]) < 1e-9);
    std::shuffle(edges.begin(), edges.end(), rng);
    CHECK(pagerank(fixtures::make_graph(n, 2, edges)) == p);
  }
}

TEST_CASE("pagerank errors") {
  const auto g = fixtures::make_graph(4, 1, {{0, 0, 1}, {1, 0, 2}, {2, 0, 3}});
  CHECK_THROWS_AS(pagerank(g, 1.0), Error);
  CHECK_THROWS_AS(pagerank(g, 0.0), Error);
  try {
    pagerank(g, 0.85, 1e-15, 2);
    FAIL("expected non-convergence");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("residual") != std::string::npos);
  }
}

TEST_CASE("mlp fits constant and linear targets") {
  std::mt19937_64 rng(2);
  const auto x = fixtures::random_matrix(50, 3, rng);
  Matrix emb(50, 3);
  std::copy(x.values().begin(), x.values().end(), emb.values.begin());

  DownstreamConfig cfg;
  const auto constant = labels_from_scores(std::vector<double>(50, 1.7));
  CHECK(train_rmse(train_mlp(emb, constant, cfg), emb, constant) < 0.05);

  Matrix line(50, 1);
  std::vector<double> target(50);
  for (std::size_t i = 0; i < 50; ++i) {
    line(i, 0) = static_cast<double>(i) / 10.0;
    target[i] = 0.5 + 0.3 * line(i, 0);
  }
  const auto linear = labels_from_scores(target);
  CHECK(train_rmse(train_mlp(line, linear, cfg), line, linear) < 0.1);
}

TEST_CASE("mlp determinism, shape errors and zero weights") {
  const auto kg = synth_kg(80, 3, 2);
  DownstreamConfig cfg;
  cfg.epochs = 50;
  const auto a = train_mlp(kg.features, kg.labels, cfg);
  const auto b = train_mlp(kg.features, kg.labels, cfg);
  const auto nodes = kg.labels.nodes();
  const auto pa = predict(a, kg.features, nodes);
  CHECK(pa == predict(b, kg.features, nodes));
  CHECK(pa == predict(a, kg.features, nodes));
  CHECK(pa.size() == nodes.size());
  for (double v : pa) CHECK(std::isfinite(v));

  CHECK_THROWS_AS(predict(a, Matrix(80, 2), nodes), Error);
  CHECK_THROWS_AS(train_mlp(kg.features, LabelSet{}, cfg), Error);

  auto zero = a;
  for (auto& [name, t] : zero.params) {
    Tensor copy = t;
    for (auto& v : copy.mutable_values()) v = 0.0;
  }
  for (double v : predict(zero, kg.features, nodes)) CHECK(v == 0.0);
}

TEST_CASE("both heads decrease training MSE over the first 10 epochs") {
  const auto kg = synth_kg(300, 5, 7);
  const auto g = fixtures::messages(kg.graph);
  DownstreamConfig cfg;
  cfg.epochs = 11;
  const auto mlp = train_mlp(kg.features, kg.labels, cfg);
  const auto agg = train_aggregated_scorer(g, kg.features, kg.labels, cfg);
  for (const auto* m : {&mlp, &agg}) {
    REQUIRE(m->train_mse.size() == 11);
    for (std::size_t e = 1; e < 11; ++e) CHECK(m->train_mse[e] < m->train_mse[e - 1]);
  }
}

TEST_CASE("scorer attention sums to one per node") {
  const auto kg = synth_kg(120, 4, 3);
  const auto g = fixtures::messages(kg.graph);
  DownstreamConfig cfg;
  cfg.epochs = 20;
  const auto m = train_aggregated_scorer(g, kg.features, kg.labels, cfg);
  const auto alpha = scorer_attention(m, kg.features, g);
  std::vector<double> totals(g.node_count, 0.0);
  for (std::size_t e = 0; e < g.dst.size(); ++e) totals[g.dst[e]] += alpha.values()[e];
  for (double t : totals) CHECK(std::abs(t - 1.0) <= 1e-12);
  CHECK_THROWS_AS(predict(m, kg.features, kg.labels.nodes()), Error);
}

TEST_CASE("scorer on isolated nodes behaves like the linear head") {
  std::mt19937_64 rng(8);
  const auto x = fixtures::random_matrix(30, 4, rng);
  Matrix emb(30, 4);
  std::copy(x.values().begin(), x.values().end(), emb.values.begin());
  std::vector<double> target(30);
  for (std::size_t i = 0; i < 30; ++i) target[i] = 1.0 + 0.2 * emb(i, 0) * emb(i, 0);
  const auto labels = labels_from_scores(target);

  const auto g = fixtures::messages(fixtures::make_graph(30, 1, {}));
  DownstreamConfig cfg;
  cfg.epochs = 100;
  const auto agg = train_aggregated_scorer(g, emb, labels, cfg);
  cfg.hidden_dim = 0;
  const auto lin = train_mlp(emb, labels, cfg);
  const auto nodes = labels.nodes();
  const auto pa = predict(agg, emb, nodes, &g);
  const auto pl = predict(lin, emb, nodes);
  for (std::size_t i = 0; i < nodes.size(); ++i) CHECK(std::abs(pa[i] - pl[i]) < 1e-12);
}

TEST_CASE("scorer predictions ignore adjacency storage order") {
  std::mt19937_64 rng(31);
  auto edges = fixtures::random_edges(25, 3, 60, rng);
  const auto kg = synth_kg(25, 3, 1);
  const auto g1 = fixtures::messages(fixtures::make_graph(25, 3, edges));
  std::shuffle(edges.begin(), edges.end(), rng);
  const auto g2 = fixtures::messages(fixtures::make_graph(25, 3, edges));
  DownstreamConfig cfg;
  cfg.epochs = 30;
  const auto m1 = train_aggregated_scorer(g1, kg.features, kg.labels, cfg);
  const auto m2 = train_aggregated_scorer(g2, kg.features, kg.labels, cfg);
  const auto nodes = kg.labels.nodes();
  CHECK(predict(m1, kg.features, nodes, &g1) == predict(m2, kg.features, nodes, &g2));
}

TEST_CASE("scorer ranks held-out nodes on the planted graph") {
  const auto kg = synth_kg(500, 5, 7);
  const auto g = fixtures::messages(kg.graph);
  std::vector<NodeId> train_nodes, test_nodes;
  for (const auto n : kg.labels.nodes()) (n % 5 == 0 ? test_nodes : train_nodes).push_back(n);
  DownstreamConfig cfg;
  cfg.epochs = 200;
  const auto m = train_aggregated_scorer(g, kg.features, kg.labels.subset(train_nodes), cfg);
  const auto pred = predict(m, kg.features, test_nodes, &g);
  std::vector<double> truth;
  for (const auto n : test_nodes) truth.push_back(kg.labels.score(n));
  CHECK(spearman(pred, truth) > 0.0);
}
