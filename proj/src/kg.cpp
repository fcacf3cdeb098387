#include "licap/kg.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <string>

#include "licap/error.hpp"

namespace licap {

namespace {

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      parts.push_back(line.substr(start));
      return parts;
    }
    parts.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

std::string_view strip_cr(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

bool skip_line(std::string_view line) {
  return line.empty() || line.front() == '#';
}

std::optional<double> parse_real(std::string_view text) {
  while (!text.empty() && text.front() == ' ') text.remove_prefix(1);
  while (!text.empty() && text.back() == ' ') text.remove_suffix(1);
  if (text.empty()) return std::nullopt;
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) return std::nullopt;
  return value;
}

}  // namespace

std::uint32_t Interner::intern(std::string_view name) {
  const auto it = ids_.find(std::string(name));
  if (it != ids_.end()) return it->second;
  const auto id = static_cast<std::uint32_t>(names_.size());
  names_.emplace_back(name);
  ids_.emplace(names_.back(), id);
  return id;
}

std::optional<std::uint32_t> Interner::find(std::string_view name) const {
  const auto it = ids_.find(std::string(name));
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

KnowledgeGraph::KnowledgeGraph(Interner nodes, Interner predicates, std::vector<Edge> edges)
    : nodes_(std::move(nodes)), predicates_(std::move(predicates)), edges_(std::move(edges)) {
  for (const auto& e : edges_) {
    if (e.head >= nodes_.size() || e.tail >= nodes_.size())
      throw Error("edge references node id outside [0, node_count)");
    if (e.predicate >= predicates_.size())
      throw Error("edge references predicate id outside [0, predicate_count)");
  }
  build_adjacency();
}

void KnowledgeGraph::build_adjacency() {
  const std::size_t n = nodes_.size();
  offsets_.assign(n + 1, 0);
  for (const auto& e : edges_) ++offsets_[e.tail + 1];
  for (std::size_t i = 0; i < n; ++i) offsets_[i + 1] += offsets_[i];
  neighbors_.assign(edges_.size(), Neighbor{});
  std::vector<std::size_t> cursor(offsets_.begin(), offsets_.end() - 1);
  for (const auto& e : edges_) neighbors_[cursor[e.tail]++] = Neighbor{e.head, e.predicate};
  for (std::size_t i = 0; i < n; ++i) {
    std::sort(neighbors_.begin() + static_cast<std::ptrdiff_t>(offsets_[i]),
              neighbors_.begin() + static_cast<std::ptrdiff_t>(offsets_[i + 1]));
  }
}

std::span<const Neighbor> KnowledgeGraph::incoming(NodeId node) const {
  if (node >= node_count()) throw Error("node id " + std::to_string(node) + " out of range");
  return {neighbors_.data() + offsets_[node], offsets_[node + 1] - offsets_[node]};
}

KnowledgeGraph load_graph(std::istream& in) {
  Interner nodes;
  Interner predicates;
  std::vector<Edge> edges;
  std::string buffer;
  std::size_t line_no = 0;
  while (std::getline(in, buffer)) {
    ++line_no;
    const auto line = strip_cr(buffer);
    if (skip_line(line)) continue;
    const auto fields = split(line, '\t');
    if (fields.size() != 3)
      throw ParseError(line_no, "expected 3 tab-separated fields, got " +
                                    std::to_string(fields.size()));
    const NodeId head = nodes.intern(fields[0]);
    const PredicateId pred = predicates.intern(fields[1]);
    const NodeId tail = nodes.intern(fields[2]);
    edges.push_back({head, pred, tail});
  }
  if (edges.empty()) throw Error("graph file contains no triples");
  return KnowledgeGraph(std::move(nodes), std::move(predicates), std::move(edges));
}

KnowledgeGraph augment_for_message_passing(const KnowledgeGraph& kg) {
  if (kg.augmented()) throw Error("graph is already augmented for message passing");
  const auto base = static_cast<PredicateId>(kg.predicate_count());
  Interner predicates = kg.predicates();
  for (PredicateId p = 0; p < base; ++p) predicates.intern("~" + kg.predicates().name(p));
  const PredicateId self = predicates.intern("<self>");
  if (self != 2 * base) throw Error("predicate names collide with reserved augmentation names");

  std::vector<Edge> edges;
  edges.reserve(2 * kg.edge_count() + kg.node_count());
  edges.insert(edges.end(), kg.edges().begin(), kg.edges().end());
  for (const auto& e : kg.edges()) edges.push_back({e.tail, e.predicate + base, e.head});
  for (NodeId i = 0; i < kg.node_count(); ++i) edges.push_back({i, self, i});

  KnowledgeGraph out(kg.nodes(), std::move(predicates), std::move(edges));
  out.augmented_ = true;
  return out;
}

LabelSet LabelSet::from_raw(std::span<const std::pair<NodeId, double>> raw) {
  LabelSet set;
  set.entries_.reserve(raw.size());
  for (const auto& [node, value] : raw) {
    if (!(value >= 0.0) || !std::isfinite(value))
      throw Error("label for node id " + std::to_string(node) +
                  " must be a finite nonnegative value");
    set.entries_.push_back({node, value, std::log1p(value)});
  }
  std::sort(set.entries_.begin(), set.entries_.end(),
            [](const Entry& a, const Entry& b) { return a.node < b.node; });
  for (std::size_t i = 0; i < set.entries_.size(); ++i) {
    if (!set.index_.emplace(set.entries_[i].node, i).second)
      throw Error("duplicate label for node id " + std::to_string(set.entries_[i].node));
  }
  return set;
}

double LabelSet::score(NodeId node) const {
  const auto it = index_.find(node);
  if (it == index_.end()) throw Error("node id " + std::to_string(node) + " has no label");
  return entries_[it->second].score;
}

double LabelSet::raw(NodeId node) const {
  const auto it = index_.find(node);
  if (it == index_.end()) throw Error("node id " + std::to_string(node) + " has no label");
  return entries_[it->second].raw;
}

std::vector<NodeId> LabelSet::nodes() const {
  std::vector<NodeId> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.push_back(e.node);
  return out;
}

std::vector<double> LabelSet::scores() const {
  std::vector<double> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.push_back(e.score);
  return out;
}

LabelSet LabelSet::subset(std::span<const NodeId> nodes) const {
  std::vector<std::pair<NodeId, double>> raw;
  raw.reserve(nodes.size());
  for (const NodeId n : nodes) raw.emplace_back(n, this->raw(n));
  return from_raw(raw);
}

LabelSet load_labels(std::istream& in, const Interner& names) {
  std::vector<std::pair<NodeId, double>> raw;
  std::unordered_map<NodeId, std::size_t> seen;
  std::string buffer;
  std::size_t line_no = 0;
  while (std::getline(in, buffer)) {
    ++line_no;
    const auto line = strip_cr(buffer);
    if (skip_line(line)) continue;
    const auto fields = split(line, '\t');
    if (fields.size() != 2)
      throw ParseError(line_no, "expected `node<TAB>value`, got " +
                                    std::to_string(fields.size()) + " fields");
    const auto id = names.find(fields[0]);
    if (!id) throw ParseError(line_no, "unknown node '" + std::string(fields[0]) + "'");
    const auto value = parse_real(fields[1]);
    if (!value || !std::isfinite(*value))
      throw ParseError(line_no, "label value is not a number: '" + std::string(fields[1]) + "'");
    if (*value < 0.0)
      throw ParseError(line_no, "negative label value for node '" + std::string(fields[0]) + "'");
    if (!seen.emplace(*id, line_no).second)
      throw ParseError(line_no, "duplicate label for node '" + std::string(fields[0]) + "'");
    raw.emplace_back(*id, *value);
  }
  return LabelSet::from_raw(raw);
}

FeatureMatrix load_features(std::istream& in, const Interner& names) {
  const std::size_t n = names.size();
  FeatureMatrix features;
  std::vector<bool> present(n, false);
  std::string buffer;
  std::size_t line_no = 0;
  while (std::getline(in, buffer)) {
    ++line_no;
    const auto line = strip_cr(buffer);
    if (skip_line(line)) continue;
    const auto fields = split(line, '\t');
    if (fields.size() != 2)
      throw ParseError(line_no, "expected `node<TAB>v1,v2,...`");
    const auto id = names.find(fields[0]);
    if (!id) throw ParseError(line_no, "unknown node '" + std::string(fields[0]) + "'");
    const auto cells = split(fields[1], ',');
    if (features.cols == 0) features = FeatureMatrix(n, cells.size());
    if (cells.size() != features.cols)
      throw ParseError(line_no, "ragged row: expected " + std::to_string(features.cols) +
                                    " values, got " + std::to_string(cells.size()));
    if (present[*id])
      throw ParseError(line_no, "duplicate feature row for node '" + std::string(fields[0]) + "'");
    present[*id] = true;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const auto v = parse_real(cells[c]);
      if (!v || !std::isfinite(*v))
        throw ParseError(line_no, "non-numeric feature value '" + std::string(cells[c]) + "'");
      features(*id, c) = *v;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!present[i]) throw Error("missing feature row for node '" + names.name(static_cast<std::uint32_t>(i)) + "'");
  }
  return features;
}

}  // namespace licap
