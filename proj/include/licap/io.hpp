#pragma once

#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "licap/kg.hpp"
#include "licap/pregat.hpp"
#include "licap/pretrain.hpp"

namespace licap {

/// Shortest decimal text that parses back to the same double.
std::string format_real(double value);

/// `node<TAB>v1,v2,...`, one row per node in id order.
void write_embeddings(std::ostream& out, const Matrix& embeddings, const Interner& names);

/// `node<TAB>score`.
void write_predictions(std::ostream& out, std::span<const NodeId> nodes,
                       std::span<const double> scores, const Interner& names);
std::vector<std::pair<std::string, double>> read_predictions(std::istream& in);

/// CSV `epoch,l1,l2,total`.
void write_training_log(std::ostream& out, std::span<const EpochRecord> log);

/// Text checkpoint. A `licap-params 1` header line, then one line per tensor:
/// `name<TAB>rows<TAB>cols<TAB>v1,v2,...` (row-major).
void write_params(std::ostream& out, std::span<const NamedTensor> tensors);
std::vector<NamedTensor> read_params(std::istream& in);

void write_graph(std::ostream& out, const KnowledgeGraph& kg);
void write_labels(std::ostream& out, const LabelSet& labels, const Interner& names);

}  // namespace licap
