#include "licap/cli.hpp"

#include <CLI11.hpp>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <thread>

#include "licap/config.hpp"
#include "licap/downstream.hpp"
#include "licap/error.hpp"
#include "licap/experiment.hpp"
#include "licap/io.hpp"
#include "licap/kg.hpp"
#include "licap/metrics.hpp"
#include "licap/pretrain.hpp"
#include "licap/synth.hpp"

namespace licap {

namespace {

constexpr int kUsageError = 2;

struct UsageError : Error {
  using Error::Error;
};

/// Flags that override config-file values when given.
struct Overrides {
  std::optional<std::string> config;
  std::optional<std::string> graph, labels, features, out;
  std::optional<double> gamma, bin_width, eta1, eta2, tau, k_neg, lr, slope;
  std::optional<std::size_t> epochs, patience, min_epochs, monitor_window, hidden_dim, heads, predicate_dim, layers;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> variant, encoder;
  std::optional<std::string> model;
  std::optional<std::size_t> down_hidden, down_epochs;
  std::optional<double> down_lr;
  std::optional<std::string> ks;
  std::optional<std::size_t> folds;
  bool skip_pretrain = false;
  bool compare = false;
};

void add_input_flags(CLI::App* cmd, Overrides& o, bool features) {
  cmd->add_option("--graph", o.graph, "Triples TSV: head<TAB>predicate<TAB>tail");
  cmd->add_option("--labels", o.labels, "Labels TSV: node<TAB>raw_importance");
  if (features) cmd->add_option("--features", o.features, "Features TSV: node<TAB>v1,v2,...");
  cmd->add_option("--config", o.config, "Config file ([paths]/[pretrain]/[downstream]/[eval]/[run])");
}

void add_pretrain_flags(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--gamma", o.gamma, "Important ratio: fraction of labelled nodes in the top bin");
  cmd->add_option("--bin-width", o.bin_width, "Width of the finer score bins inside the top bin");
  cmd->add_option("--eta1", o.eta1, "Weight of the top/non-top loss");
  cmd->add_option("--eta2", o.eta2, "Weight of the finer-bin loss");
  cmd->add_option("--tau", o.tau, "Contrastive temperature");
  cmd->add_option("--k-neg", o.k_neg, "Negative sampling ratio over the non-top set");
  cmd->add_option("--epochs", o.epochs, "Maximum pretraining epochs");
  cmd->add_option("--patience", o.patience, "Early-stopping patience (epochs)");
  cmd->add_option("--min-epochs", o.min_epochs, "Epochs before early stopping may trigger");
  cmd->add_option("--monitor-window", o.monitor_window, "Trailing epochs averaged by early stopping");
  cmd->add_option("--lr", o.lr, "Pretraining learning rate");
  cmd->add_option("--seed", o.seed, "Random seed");
  cmd->add_option("--variant", o.variant, "full | l1_only | l2_only | random_sampling");
  cmd->add_option("--encoder", o.encoder, "pregat | gat");
  cmd->add_option("--hidden-dim", o.hidden_dim, "Encoder hidden size per head");
  cmd->add_option("--heads", o.heads, "Encoder attention heads");
  cmd->add_option("--predicate-dim", o.predicate_dim, "Predicate embedding size");
  cmd->add_option("--layers", o.layers, "Encoder depth");
  cmd->add_option("--negative-slope", o.slope, "LeakyReLU slope");
}

void add_downstream_flags(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--model", o.model, "Downstream head: mlp | aggregated");
  cmd->add_option("--model-hidden", o.down_hidden, "Hidden width of the MLP head (0 = linear)");
  cmd->add_option("--model-epochs", o.down_epochs, "Downstream training epochs");
  cmd->add_option("--model-lr", o.down_lr, "Downstream learning rate");
}

template <typename T, typename U>
void take(const std::optional<T>& flag, U& target) {
  if (flag) target = static_cast<U>(*flag);
}

ExperimentConfig resolve(const Overrides& o) {
  ExperimentConfig c;
  if (o.config) apply_config_file(c, *o.config);
  take(o.graph, c.graph_path);
  take(o.labels, c.labels_path);
  take(o.features, c.features_path);
  take(o.out, c.output_path);
  auto& p = c.pretrain;
  take(o.gamma, p.gamma);
  take(o.bin_width, p.bin_width);
  take(o.eta1, p.eta1);
  take(o.eta2, p.eta2);
  take(o.tau, p.tau);
  take(o.k_neg, p.k_neg);
  take(o.epochs, p.epochs);
  take(o.patience, p.patience);
  take(o.min_epochs, p.min_epochs);
  take(o.monitor_window, p.monitor_window);
  take(o.lr, p.learning_rate);
  take(o.seed, p.seed);
  take(o.seed, c.eval_seed);
  take(o.hidden_dim, p.hidden_dim);
  take(o.heads, p.heads);
  take(o.predicate_dim, p.predicate_dim);
  take(o.layers, p.layers);
  take(o.slope, p.negative_slope);
  if (o.variant) p.variant = parse_variant(*o.variant);
  if (o.encoder) p.encoder = parse_encoder(*o.encoder);
  if (o.model) c.downstream.kind = parse_nie_kind(*o.model);
  take(o.down_hidden, c.downstream.hidden_dim);
  take(o.down_epochs, c.downstream.epochs);
  take(o.down_lr, c.downstream.learning_rate);
  if (o.ks) c.ks = parse_k_list(*o.ks);
  take(o.folds, c.folds);
  if (o.skip_pretrain) c.skip_pretrain = true;
  if (o.compare) c.compare = true;
  return c;
}

void require(const std::string& value, const char* flag) {
  if (value.empty()) throw UsageError(std::string(flag) + " is required");
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "'");
  return in;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path + "'");
  return out;
}

KnowledgeGraph read_graph(const std::string& path) {
  auto in = open_in(path);
  try {
    return load_graph(in);
  } catch (const ParseError& e) {
    throw Error(path + ": " + e.what());
  }
}

LabelSet read_labels(const std::string& path, const Interner& names) {
  auto in = open_in(path);
  try {
    return load_labels(in, names);
  } catch (const Error& e) {
    throw Error(path + ": " + e.what());
  }
}

FeatureMatrix read_features(const std::string& path, const Interner& names) {
  auto in = open_in(path);
  try {
    return load_features(in, names);
  } catch (const Error& e) {
    throw Error(path + ": " + e.what());
  }
}

std::size_t worker_count() {
  std::size_t n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* cap = std::getenv("LICAP_THREADS")) {
    const auto v = std::strtoull(cap, nullptr, 10);
    if (v > 0) n = std::min<std::size_t>(n, v);
  }
  return n;
}

int cmd_pretrain(const Overrides& o, const std::string& log_path, const std::string& params_path,
                 std::ostream& out) {
  const auto c = resolve(o);
  require(c.graph_path, "--graph");
  require(c.labels_path, "--labels");
  require(c.features_path, "--features");
  require(c.output_path, "--out");
  const auto kg = read_graph(c.graph_path);
  const auto labels = read_labels(c.labels_path, kg.nodes());
  const auto features = read_features(c.features_path, kg.nodes());
  const auto result = pretrain(kg, features, labels, c.pretrain);

  auto emb = open_out(c.output_path);
  write_embeddings(emb, result.embeddings, kg.nodes());
  auto log = open_out(log_path.empty() ? c.output_path + ".log.csv" : log_path);
  write_training_log(log, result.log);
  if (!params_path.empty()) {
    auto ckpt = open_out(params_path);
    write_params(ckpt, result.params.named_tensors());
  }
  out << "pretrained " << result.embeddings.rows << " x " << result.embeddings.cols
      << " embeddings in " << result.log.size() << " epochs (best epoch " << result.best_epoch
      << ", loss " << format_real(result.best_loss) << ")\n";
  return 0;
}

int cmd_train(const Overrides& o, const std::string& embeddings_path, bool all_nodes, std::ostream& out) {
  const auto c = resolve(o);
  require(c.graph_path, "--graph");
  require(c.labels_path, "--labels");
  require(embeddings_path, "--embeddings");
  require(c.output_path, "--out");
  const auto kg = read_graph(c.graph_path);
  const auto labels = read_labels(c.labels_path, kg.nodes());
  const auto embeddings = read_features(embeddings_path, kg.nodes());
  const auto graph = message_graph(augment_for_message_passing(kg));
  auto down = c.downstream;
  down.seed = c.pretrain.seed;
  const auto model = down.kind == NieKind::mlp ? train_mlp(embeddings, labels, down)
                                               : train_aggregated_scorer(graph, embeddings, labels, down);
  std::vector<NodeId> nodes = labels.nodes();
  if (all_nodes) {
    nodes.clear();
    for (NodeId i = 0; i < kg.node_count(); ++i) nodes.push_back(i);
  }
  const auto scores = predict(model, embeddings, nodes, &graph);
  auto pred = open_out(c.output_path);
  write_predictions(pred, nodes, scores, kg.nodes());
  out << "trained " << to_string(down.kind) << " head on " << labels.size() << " nodes; final train MSE "
      << format_real(model.train_mse.back()) << "\n";
  return 0;
}

int cmd_eval(const std::string& predictions_path, const Overrides& o, std::ostream& out) {
  const auto c = resolve(o);
  require(predictions_path, "--predictions");
  require(c.labels_path, "--labels");
  auto in = open_in(predictions_path);
  const auto rows = read_predictions(in);
  Interner names;
  std::vector<double> pred;
  for (const auto& [name, score] : rows) {
    if (names.find(name)) throw Error(predictions_path + ": duplicate prediction for '" + name + "'");
    names.intern(name);
    pred.push_back(score);
  }
  const auto labels = read_labels(c.labels_path, names);
  if (labels.size() != names.size()) {
    for (std::uint32_t i = 0; i < names.size(); ++i)
      if (!labels.contains(i))
        throw Error("node '" + names.name(i) + "' has a prediction but no label");
  }
  std::vector<double> truth;
  for (std::uint32_t i = 0; i < names.size(); ++i) truth.push_back(labels.score(i));
  const auto report = evaluate(pred, truth, c.ks);
  const auto cols = report_columns(c.ks);
  const auto vals = report_values(report);
  for (std::size_t i = 0; i < cols.size(); ++i) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%-12s %.6f\n", cols[i].c_str(), vals[i]);
    out << buf;
  }
  return 0;
}

int cmd_experiment(const Overrides& o, std::size_t synthetic, std::size_t synthetic_predicates,
                   std::ostream& out) {
  auto c = resolve(o);
  KnowledgeGraph kg;
  LabelSet labels;
  FeatureMatrix features;
  if (synthetic > 0) {
    auto fixture = synth_kg(synthetic, synthetic_predicates, c.eval_seed);
    kg = std::move(fixture.graph);
    labels = std::move(fixture.labels);
    features = std::move(fixture.features);
  } else {
    require(c.graph_path, "--graph (or --synthetic)");
    require(c.labels_path, "--labels");
    require(c.features_path, "--features");
    kg = read_graph(c.graph_path);
    labels = read_labels(c.labels_path, kg.nodes());
    features = read_features(c.features_path, kg.nodes());
  }

  ExperimentSpec spec;
  spec.downstream = c.downstream;
  spec.folds = c.folds;
  spec.seed = c.eval_seed;
  spec.ks = c.ks;
  spec.threads = worker_count();
  const std::string licap_name = "licap-" + to_string(c.pretrain.variant) + "-" + to_string(c.pretrain.encoder);
  if (c.compare || c.skip_pretrain) spec.arms.push_back({"raw", false, c.pretrain});
  if (!c.skip_pretrain) spec.arms.push_back({licap_name, true, c.pretrain});

  const auto report = run_experiment(kg, features, labels, spec);
  write_report_table(out, report);
  if (!c.output_path.empty()) {
    auto csv = open_out(c.output_path);
    write_report_csv(csv, report);
  } else {
    out << '\n';
    write_report_csv(out, report);
  }
  return 0;
}

int cmd_synth(std::size_t nodes, std::size_t predicates, std::uint64_t seed, const std::string& dir,
              std::ostream& out) {
  require(dir, "--out-dir");
  const auto fixture = synth_kg(nodes, predicates, seed);
  auto g = open_out(dir + "/graph.tsv");
  write_graph(g, fixture.graph);
  auto l = open_out(dir + "/labels.tsv");
  write_labels(l, fixture.labels, fixture.graph.nodes());
  auto f = open_out(dir + "/features.tsv");
  write_embeddings(f, fixture.features, fixture.graph.nodes());
  out << "wrote " << fixture.graph.node_count() << " nodes, " << fixture.graph.edge_count()
      << " edges to " << dir << "\n";
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Pretrain knowledge-graph node embeddings from importance labels and score node importance"};
  app.require_subcommand(1);
  Overrides o;

  auto* pre = app.add_subcommand("pretrain", "Pretrain node embeddings and write them as TSV");
  add_input_flags(pre, o, true);
  add_pretrain_flags(pre, o);
  pre->add_option("--out", o.out, "Output embeddings TSV");
  std::string log_path, params_path;
  pre->add_option("--log", log_path, "Training log CSV (default: <out>.log.csv)");
  pre->add_option("--save-params", params_path, "Write the encoder parameters to this file");

  auto* train = app.add_subcommand("train", "Fit a downstream head on embeddings and write predictions");
  add_input_flags(train, o, false);
  add_downstream_flags(train, o);
  std::string embeddings_path;
  bool all_nodes = false;
  train->add_option("--embeddings", embeddings_path, "Embeddings TSV (pretrained or raw features)");
  train->add_option("--out", o.out, "Output predictions TSV");
  train->add_option("--seed", o.seed, "Random seed");
  train->add_flag("--all-nodes", all_nodes, "Predict every graph node, not only labelled ones");

  auto* eval = app.add_subcommand("eval", "Score a predictions file against labels");
  std::string predictions_path;
  eval->add_option("--predictions", predictions_path, "Predictions TSV: node<TAB>score");
  eval->add_option("--labels", o.labels, "Labels TSV: node<TAB>raw_importance");
  eval->add_option("--k", o.ks, "Comma-separated cutoffs for NDCG@k and OVER@k");
  eval->add_option("--config", o.config, "Config file");

  auto* exp = app.add_subcommand("experiment", "k-fold evaluation, optionally comparing raw and pretrained inputs");
  add_input_flags(exp, o, true);
  add_pretrain_flags(exp, o);
  add_downstream_flags(exp, o);
  std::size_t synthetic = 0, synthetic_predicates = 5;
  exp->add_option("--synthetic", synthetic, "Use a planted synthetic graph with this many nodes");
  exp->add_option("--synthetic-predicates", synthetic_predicates, "Predicates in the synthetic graph");
  exp->add_option("--k", o.ks, "Comma-separated cutoffs for NDCG@k and OVER@k");
  exp->add_option("--folds", o.folds, "Number of cross-validation folds");
  exp->add_flag("--compare", o.compare, "Also run the raw-feature arm");
  exp->add_flag("--skip-pretrain", o.skip_pretrain, "Only run the raw-feature arm");
  exp->add_option("--out", o.out, "Report CSV (default: printed after the table)");

  auto* syn = app.add_subcommand("synth", "Write a planted synthetic graph as TSV files");
  std::size_t syn_nodes = 500, syn_predicates = 5;
  std::uint64_t syn_seed = 0;
  std::string syn_dir;
  syn->add_option("--nodes", syn_nodes, "Number of nodes");
  syn->add_option("--predicates", syn_predicates, "Number of predicates");
  syn->add_option("--seed", syn_seed, "Random seed");
  syn->add_option("--out-dir", syn_dir, "Directory for graph.tsv, labels.tsv, features.tsv");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : kUsageError;
  }

  try {
    if (pre->parsed()) return cmd_pretrain(o, log_path, params_path, out);
    if (train->parsed()) return cmd_train(o, embeddings_path, all_nodes, out);
    if (eval->parsed()) return cmd_eval(predictions_path, o, out);
    if (exp->parsed()) return cmd_experiment(o, synthetic, synthetic_predicates, out);
    if (syn->parsed()) return cmd_synth(syn_nodes, syn_predicates, syn_seed, syn_dir, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\nRun with --help for usage.\n";
    return kUsageError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return kUsageError;
}

}  // namespace licap
