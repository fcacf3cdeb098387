#pragma once

#include <cstddef>
#include <cstdint>
#include <istream>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace licap {

using NodeId = std::uint32_t;
using PredicateId = std::uint32_t;

/// Dense string -> id table; ids are handed out in first-seen order.
class Interner {
 public:
  std::uint32_t intern(std::string_view name);
  std::optional<std::uint32_t> find(std::string_view name) const;
  const std::string& name(std::uint32_t id) const { return names_.at(id); }
  std::size_t size() const noexcept { return names_.size(); }
  const std::vector<std::string>& names() const noexcept { return names_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::uint32_t> ids_;
};

struct Edge {
  NodeId head = 0;
  PredicateId predicate = 0;
  NodeId tail = 0;

  bool operator==(const Edge&) const = default;
};

/// Incoming neighbor of a node for message passing.
struct Neighbor {
  NodeId node = 0;
  PredicateId predicate = 0;

  auto operator<=>(const Neighbor&) const = default;
};

/// Directed multi-relational graph. Immutable once built.
///
/// Adjacency lists hold, for each node i, the (j, p) pairs of every edge
/// (j, p, i), sorted by (j, p) so that reductions over a neighborhood never
/// depend on the order edges were stored in.
class KnowledgeGraph {
 public:
  KnowledgeGraph() = default;
  KnowledgeGraph(Interner nodes, Interner predicates, std::vector<Edge> edges);

  std::size_t node_count() const noexcept { return nodes_.size(); }
  std::size_t predicate_count() const noexcept { return predicates_.size(); }
  std::size_t edge_count() const noexcept { return edges_.size(); }
  const std::vector<Edge>& edges() const noexcept { return edges_; }
  std::span<const Neighbor> incoming(NodeId node) const;
  const Interner& nodes() const noexcept { return nodes_; }
  const Interner& predicates() const noexcept { return predicates_; }
  bool augmented() const noexcept { return augmented_; }

  friend KnowledgeGraph augment_for_message_passing(const KnowledgeGraph& kg);

 private:
  void build_adjacency();

  Interner nodes_;
  Interner predicates_;
  std::vector<Edge> edges_;
  std::vector<std::size_t> offsets_;
  std::vector<Neighbor> neighbors_;
  bool augmented_ = false;
};

/// Parses `head<TAB>predicate<TAB>tail` lines. `#` lines and blank lines are
/// skipped.
KnowledgeGraph load_graph(std::istream& in);

/// Adds a reverse edge (t, p + P, h) for every (h, p, t) and a self edge
/// (i, 2P, i) for every node. Throws if the graph is already augmented.
KnowledgeGraph augment_for_message_passing(const KnowledgeGraph& kg);

/// Importance labels: score = ln(1 + raw).
class LabelSet {
 public:
  struct Entry {
    NodeId node;
    double raw;
    double score;
  };

  LabelSet() = default;
  /// Builds from raw values; throws on negatives or duplicates.
  static LabelSet from_raw(std::span<const std::pair<NodeId, double>> raw);

  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  bool contains(NodeId node) const { return index_.count(node) != 0; }
  double score(NodeId node) const;
  double raw(NodeId node) const;
  /// Entries sorted by ascending node id.
  const std::vector<Entry>& entries() const noexcept { return entries_; }
  std::vector<NodeId> nodes() const;
  std::vector<double> scores() const;
  /// Restriction to the given nodes (all must be present).
  LabelSet subset(std::span<const NodeId> nodes) const;

 private:
  std::vector<Entry> entries_;
  std::unordered_map<NodeId, std::size_t> index_;
};

/// `node<TAB>raw_value`; node names resolve through `names`.
LabelSet load_labels(std::istream& in, const Interner& names);

/// Dense row-major real matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), values(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
  std::span<const double> row(std::size_t r) const {
    return {values.data() + r * cols, cols};
  }
  std::span<double> row(std::size_t r) { return {values.data() + r * cols, cols}; }
};

/// Initial node embeddings, one row per node.
using FeatureMatrix = Matrix;

/// `node<TAB>v1,v2,...`; every node must appear exactly once.
FeatureMatrix load_features(std::istream& in, const Interner& names);

}  // namespace licap
