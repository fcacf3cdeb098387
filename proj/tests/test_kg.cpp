#include <doctest.h>

#include <cmath>
#include <sstream>

#include "licap/error.hpp"
#include "licap/kg.hpp"

using namespace licap;

namespace {

KnowledgeGraph parse(const std::string& text) {
  std::istringstream in(text);
  return load_graph(in);
}

std::size_t count_edges(const KnowledgeGraph& kg, NodeId head, PredicateId p, NodeId tail) {
  std::size_t n = 0;
  for (const auto& e : kg.edges()) n += (e == Edge{head, p, tail});
  return n;
}

}  // namespace

TEST_CASE("interner assigns first-seen ids and round-trips") {
  Interner names;
  CHECK(names.intern("b") == 0);
  CHECK(names.intern("a") == 1);
  CHECK(names.intern("b") == 0);
  CHECK(names.size() == 2);
  for (std::uint32_t id = 0; id < names.size(); ++id) CHECK(*names.find(names.name(id)) == id);
  CHECK_FALSE(names.find("zz").has_value());
}

TEST_CASE("load_graph counts nodes, predicates and edges") {
  const auto kg = parse("a\tp\tb\nb\tq\ta\n");
  CHECK(kg.node_count() == 2);
  CHECK(kg.predicate_count() == 2);
  CHECK(kg.edge_count() == 2);
  CHECK_FALSE(kg.augmented());
}

TEST_CASE("load_graph keeps self edges and parallel edges") {
  const auto self = parse("a\tp\ta\n");
  CHECK(self.node_count() == 1);
  CHECK(self.edge_count() == 1);

  const auto twice = parse("a\tp\tb\na\tp\tb\n");
  CHECK(twice.edge_count() == 2);
  CHECK(count_edges(twice, 0, 0, 1) == 2);
}

TEST_CASE("load_graph skips comments and blank lines") {
  const auto kg = parse("# header\n\na\tp\tb\n\n# trailing\n");
  CHECK(kg.edge_count() == 1);
}

TEST_CASE("load_graph reports the line of a malformed triple") {
  try {
    parse("a\tp\tb\na\tp\n");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
  CHECK_THROWS_AS(parse("a\tp\tb\tc\n"), ParseError);
}

TEST_CASE("load_graph rejects an empty file") {
  CHECK_THROWS_AS(parse(""), Error);
  CHECK_THROWS_AS(parse("# only a comment\n"), Error);
}

TEST_CASE("augmentation adds reverse and self edges") {
  SUBCASE("one edge, two nodes") {
    const auto aug = augment_for_message_passing(parse("a\tp\tb\n"));
    CHECK(aug.edge_count() == 4);
    CHECK(aug.predicate_count() == 3);
    CHECK(count_edges(aug, 0, 0, 1) == 1);
    CHECK(count_edges(aug, 1, 1, 0) == 1);
    CHECK(count_edges(aug, 0, 2, 0) == 1);
    CHECK(count_edges(aug, 1, 2, 1) == 1);
    CHECK(aug.augmented());
  }
  SUBCASE("edgeless graph gets self edges only") {
    Interner nodes;
    for (const char* n : {"x", "y", "z"}) nodes.intern(n);
    Interner preds;
    preds.intern("p");
    const KnowledgeGraph kg(nodes, preds, {});
    const auto aug = augment_for_message_passing(kg);
    CHECK(aug.edge_count() == 3);
    for (NodeId i = 0; i < 3; ++i) {
      REQUIRE(aug.incoming(i).size() == 1);
      CHECK(aug.incoming(i)[0] == Neighbor{i, 2});
    }
  }
  SUBCASE("self edge input keeps forward, reverse and self copies") {
    const auto aug = augment_for_message_passing(parse("a\tp\ta\n"));
    CHECK(aug.edge_count() == 3);
    CHECK(aug.incoming(0).size() == 3);
    CHECK(count_edges(aug, 0, 0, 0) == 1);
    CHECK(count_edges(aug, 0, 1, 0) == 1);
    CHECK(count_edges(aug, 0, 2, 0) == 1);
  }
}

TEST_CASE("augmenting twice is rejected") {
  const auto aug = augment_for_message_passing(parse("a\tp\tb\n"));
  CHECK_THROWS_AS(augment_for_message_passing(aug), Error);
}

TEST_CASE("incoming adjacency is sorted independent of edge order") {
  const auto one = parse("c\tq\ta\nb\tp\ta\nc\tp\ta\n");
  const auto two = parse("c\tp\ta\nc\tq\ta\nb\tp\ta\n");
  // Interning differs between the two files, so compare by names.
  auto describe = [](const KnowledgeGraph& kg) {
    std::vector<std::string> out;
    const NodeId a = *kg.nodes().find("a");
    for (const auto& nb : kg.incoming(a))
      out.push_back(kg.nodes().name(nb.node) + kg.predicates().name(nb.predicate));
    std::sort(out.begin(), out.end());
    return out;
  };
  CHECK(describe(one) == describe(two));
  const auto in = one.incoming(*one.nodes().find("a"));
  CHECK(std::is_sorted(in.begin(), in.end()));
}

TEST_CASE("labels apply ln(1 + raw)") {
  Interner names;
  for (const char* n : {"a", "b", "c"}) names.intern(n);
  std::istringstream in("a\t0\nb\t" + std::to_string(std::exp(1.0) - 1.0) + "\nc\t99\n");
  const auto labels = load_labels(in, names);
  CHECK(labels.size() == 3);
  CHECK(labels.score(0) == 0.0);
  CHECK(labels.score(1) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(labels.score(2) == doctest::Approx(4.60517).epsilon(1e-6));
  for (const auto& e : labels.entries())
    CHECK(std::abs(e.score - std::log1p(e.raw)) <= 1e-12 * std::max(1.0, e.score));
}

TEST_CASE("label errors") {
  Interner names;
  names.intern("a");
  names.intern("b");
  auto load = [&](const std::string& text) {
    std::istringstream in(text);
    return load_labels(in, names);
  };
  try {
    load("a\t1\nghost\t2\n");
    FAIL("expected an unknown-node error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("ghost") != std::string::npos);
  }
  CHECK_THROWS_AS(load("a\t-1\n"), Error);
  CHECK_THROWS_AS(load("a\t1\na\t2\n"), Error);
  CHECK_THROWS_AS(load("a\tx\n"), Error);
}

TEST_CASE("label subset keeps requested nodes") {
  const std::vector<std::pair<NodeId, double>> raw{{0, 1.0}, {3, 2.0}, {5, 0.0}};
  const auto labels = LabelSet::from_raw(raw);
  const std::vector<NodeId> keep{5, 0};
  const auto sub = labels.subset(keep);
  CHECK(sub.size() == 2);
  CHECK(sub.contains(0));
  CHECK(sub.contains(5));
  CHECK_FALSE(sub.contains(3));
  CHECK(sub.nodes() == std::vector<NodeId>{0, 5});
}

TEST_CASE("features load as a node-ordered matrix") {
  Interner names;
  names.intern("a");
  names.intern("b");
  auto load = [&](const std::string& text) {
    std::istringstream in(text);
    return load_features(in, names);
  };
  const auto m = load("b\t0,1\na\t1,0\n");
  CHECK(m.rows == 2);
  CHECK(m.cols == 2);
  CHECK(m(0, 0) == 1.0);
  CHECK(m(0, 1) == 0.0);
  CHECK(m(1, 0) == 0.0);
  CHECK(m(1, 1) == 1.0);

  CHECK_THROWS_AS(load("a\t1,0\nb\t1,2,3\n"), Error);
  CHECK_THROWS_AS(load("a\t1,zz\nb\t1,2\n"), Error);
  try {
    load("a\t1,0\n");
    FAIL("expected a missing-node error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find('b') != std::string::npos);
  }
}
