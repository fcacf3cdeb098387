#include "licap/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>

#include "licap/error.hpp"

namespace licap {

namespace {

namespace pt = boost::property_tree;

std::string trimmed(std::string s) {
  const auto first = s.find_first_not_of(" \t\"");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\"");
  return s.substr(first, last - first + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size())
    throw Error("config key '" + key + "': cannot parse '" + text + "'");
  return value;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw Error("config key '" + key + "': expected a boolean, got '" + text + "'");
}

using Setter = std::function<void(ExperimentConfig&, const std::string& key, const std::string& value)>;

template <typename T, typename Member>
Setter number(Member member) {
  return [member](ExperimentConfig& c, const std::string& key, const std::string& v) {
    std::invoke(member, c) = parse_number<T>(key, v);
  };
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"paths.graph", [](auto& c, auto&, auto& v) { c.graph_path = v; }},
      {"paths.labels", [](auto& c, auto&, auto& v) { c.labels_path = v; }},
      {"paths.features", [](auto& c, auto&, auto& v) { c.features_path = v; }},
      {"paths.out", [](auto& c, auto&, auto& v) { c.output_path = v; }},
      {"pretrain.gamma", number<double>([](ExperimentConfig& c) -> auto& { return c.pretrain.gamma; })},
      {"pretrain.bin_width", number<double>([](ExperimentConfig& c) -> auto& { return c.pretrain.bin_width; })},
      {"pretrain.eta1", number<double>([](ExperimentConfig& c) -> auto& { return c.pretrain.eta1; })},
      {"pretrain.eta2", number<double>([](ExperimentConfig& c) -> auto& { return c.pretrain.eta2; })},
      {"pretrain.tau", number<double>([](ExperimentConfig& c) -> auto& { return c.pretrain.tau; })},
      {"pretrain.k_neg", number<double>([](ExperimentConfig& c) -> auto& { return c.pretrain.k_neg; })},
      {"pretrain.epochs", number<std::size_t>([](ExperimentConfig& c) -> auto& { return c.pretrain.epochs; })},
      {"pretrain.patience", number<std::size_t>([](ExperimentConfig& c) -> auto& { return c.pretrain.patience; })},
      {"pretrain.min_epochs", number<std::size_t>([](ExperimentConfig& c) -> auto& { return c.pretrain.min_epochs; })},
      {"pretrain.monitor_window", number<std::size_t>([](ExperimentConfig& c) -> auto& { return c.pretrain.monitor_window; })},
      {"pretrain.learning_rate", number<double>([](ExperimentConfig& c) -> auto& { return c.pretrain.learning_rate; })},
      {"pretrain.seed", number<std::uint64_t>([](ExperimentConfig& c) -> auto& { return c.pretrain.seed; })},
      {"pretrain.variant", [](auto& c, auto&, auto& v) { c.pretrain.variant = parse_variant(v); }},
      {"pretrain.encoder", [](auto& c, auto&, auto& v) { c.pretrain.encoder = parse_encoder(v); }},
      {"pretrain.hidden_dim", number<std::size_t>([](ExperimentConfig& c) -> auto& { return c.pretrain.hidden_dim; })},
      {"pretrain.heads", number<std::size_t>([](ExperimentConfig& c) -> auto& { return c.pretrain.heads; })},
      {"pretrain.predicate_dim", number<std::size_t>([](ExperimentConfig& c) -> auto& { return c.pretrain.predicate_dim; })},
      {"pretrain.layers", number<std::size_t>([](ExperimentConfig& c) -> auto& { return c.pretrain.layers; })},
      {"pretrain.negative_slope", number<double>([](ExperimentConfig& c) -> auto& { return c.pretrain.negative_slope; })},
      {"downstream.model", [](auto& c, auto&, auto& v) { c.downstream.kind = parse_nie_kind(v); }},
      {"downstream.hidden_dim", number<std::size_t>([](ExperimentConfig& c) -> auto& { return c.downstream.hidden_dim; })},
      {"downstream.epochs", number<std::size_t>([](ExperimentConfig& c) -> auto& { return c.downstream.epochs; })},
      {"downstream.learning_rate", number<double>([](ExperimentConfig& c) -> auto& { return c.downstream.learning_rate; })},
      {"eval.k", [](auto& c, auto&, auto& v) { c.ks = parse_k_list(v); }},
      {"eval.folds", number<std::size_t>([](ExperimentConfig& c) -> auto& { return c.folds; })},
      {"eval.seed", number<std::uint64_t>([](ExperimentConfig& c) -> auto& { return c.eval_seed; })},
      {"run.skip_pretrain", [](auto& c, auto& k, auto& v) { c.skip_pretrain = parse_bool(k, v); }},
      {"run.compare", [](auto& c, auto& k, auto& v) { c.compare = parse_bool(k, v); }},
  };
  return table;
}

}  // namespace

void apply_config(ExperimentConfig& config, std::istream& in) {
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ParseError(e.line(), "config: " + e.message());
  }
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw Error("config key '" + section + "' must live inside a [section]");
    for (const auto& [key, node] : body) {
      const auto full = section + "." + key;
      const auto it = setters().find(full);
      if (it == setters().end()) throw Error("unknown config key '" + full + "'");
      it->second(config, full, trimmed(node.get_value<std::string>()));
    }
  }
}

void apply_config_file(ExperimentConfig& config, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config file '" + path + "'");
  apply_config(config, in);
}

std::vector<std::size_t> parse_k_list(const std::string& text) {
  std::vector<std::size_t> ks;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find(',', start);
    if (end == std::string::npos) end = text.size();
    const auto item = trimmed(text.substr(start, end - start));
    const auto k = parse_number<std::size_t>("k", item);
    if (k == 0) throw Error("k values must be positive");
    ks.push_back(k);
    start = end + 1;
  }
  return ks;
}

}  // namespace licap
