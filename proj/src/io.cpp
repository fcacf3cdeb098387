#include "licap/io.hpp"

#include <charconv>
#include <cmath>
#include <string_view>

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

double parse_real(std::string_view text, std::size_t line_no) {
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size())
    throw ParseError(line_no, "not a number: '" + std::string(text) + "'");
  return value;
}

std::size_t parse_size(std::string_view text, std::size_t line_no) {
  std::size_t value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size())
    throw ParseError(line_no, "not a size: '" + std::string(text) + "'");
  return value;
}

void write_row(std::ostream& out, std::span<const double> values) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out << ',';
    out << format_real(values[i]);
  }
}

}  // namespace

std::string format_real(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc{}) throw Error("could not format a real value");
  return std::string(buf, ptr);
}

void write_embeddings(std::ostream& out, const Matrix& embeddings, const Interner& names) {
  if (embeddings.rows != names.size())
    throw Error("embedding rows do not match the node table");
  for (std::size_t r = 0; r < embeddings.rows; ++r) {
    out << names.name(static_cast<std::uint32_t>(r)) << '\t';
    write_row(out, embeddings.row(r));
    out << '\n';
  }
}

void write_predictions(std::ostream& out, std::span<const NodeId> nodes,
                       std::span<const double> scores, const Interner& names) {
  if (nodes.size() != scores.size()) throw Error("one score per node expected");
  for (std::size_t i = 0; i < nodes.size(); ++i)
    out << names.name(nodes[i]) << '\t' << format_real(scores[i]) << '\n';
}

std::vector<std::pair<std::string, double>> read_predictions(std::istream& in) {
  std::vector<std::pair<std::string, double>> out;
  std::string buffer;
  std::size_t line_no = 0;
  while (std::getline(in, buffer)) {
    ++line_no;
    std::string_view line = buffer;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty() || line.front() == '#') continue;
    const auto fields = split(line, '\t');
    if (fields.size() != 2) throw ParseError(line_no, "expected `node<TAB>score`");
    const double v = parse_real(fields[1], line_no);
    if (!std::isfinite(v)) throw ParseError(line_no, "non-finite prediction");
    out.emplace_back(std::string(fields[0]), v);
  }
  return out;
}

void write_training_log(std::ostream& out, std::span<const EpochRecord> log) {
  out << "epoch,l1,l2,total\n";
  for (const auto& r : log)
    out << r.epoch << ',' << format_real(r.l1) << ',' << format_real(r.l2) << ','
        << format_real(r.total) << '\n';
}

void write_params(std::ostream& out, std::span<const NamedTensor> tensors) {
  out << "licap-params 1\n";
  for (const auto& [name, t] : tensors) {
    out << name << '\t' << t.rows() << '\t' << t.cols() << '\t';
    write_row(out, t.values());
    out << '\n';
  }
}

std::vector<NamedTensor> read_params(std::istream& in) {
  std::string buffer;
  if (!std::getline(in, buffer) || buffer != "licap-params 1")
    throw ParseError(1, "missing `licap-params 1` header");
  std::vector<NamedTensor> out;
  std::size_t line_no = 1;
  while (std::getline(in, buffer)) {
    ++line_no;
    if (buffer.empty()) continue;
    const auto fields = split(buffer, '\t');
    if (fields.size() != 4) throw ParseError(line_no, "expected `name<TAB>rows<TAB>cols<TAB>values`");
    const auto rows = parse_size(fields[1], line_no);
    const auto cols = parse_size(fields[2], line_no);
    std::vector<double> values;
    if (!fields[3].empty())
      for (const auto cell : split(fields[3], ',')) values.push_back(parse_real(cell, line_no));
    if (values.size() != rows * cols)
      throw ParseError(line_no, "tensor '" + std::string(fields[0]) + "' has " +
                                    std::to_string(values.size()) + " values for shape " +
                                    std::to_string(rows) + "x" + std::to_string(cols));
    out.emplace_back(std::string(fields[0]), Tensor::from({rows, cols}, std::move(values), true));
  }
  return out;
}

void write_graph(std::ostream& out, const KnowledgeGraph& kg) {
  for (const auto& e : kg.edges())
    out << kg.nodes().name(e.head) << '\t' << kg.predicates().name(e.predicate) << '\t'
        << kg.nodes().name(e.tail) << '\n';
}

void write_labels(std::ostream& out, const LabelSet& labels, const Interner& names) {
  for (const auto& e : labels.entries()) out << names.name(e.node) << '\t' << format_real(e.raw) << '\n';
}

}  // namespace licap
