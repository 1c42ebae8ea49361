#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "bitext/cli.hpp"
#include "bitext/corpus_io.hpp"
#include "bitext/embedding_core.hpp"
#include "bitext/errors.hpp"
#include "bitext/eval.hpp"
#include "bitext/experiment.hpp"
#include "bitext/finetune.hpp"
#include "bitext/knn_aligner.hpp"

namespace bitext::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct GlobalOptions {
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  std::string format = "text";
};

struct InputOptions {
  std::string format = "emb1";
  std::size_t dim = 0;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--input-format", format, "Embedding file format")
        ->check(CLI::IsMember({"emb1", "raw_f32"}))
        ->capture_default_str();
    cmd->add_option("--dim", dim, "Row dimensionality (required for raw_f32, checked for emb1)");
  }

  EmbeddingLoadOptions load_options() const {
    EmbeddingLoadOptions o;
    o.format = format == "raw_f32" ? EmbeddingFormat::raw_f32 : EmbeddingFormat::emb1;
    if (dim > 0) o.dim = dim;
    return o;
  }
};

std::string fmt6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string opt6(const std::optional<double>& v) { return v ? fmt6(*v) : "n/a"; }

std::optional<double> threshold_arg(const CLI::Option* opt, double value) {
  if (opt->count() == 0 || value <= kNoThresholdSentinel + 1e-12) return std::nullopt;
  return value;
}

std::vector<std::optional<double>> parse_grid(const std::string& spec) {
  if (spec.empty() || spec == "default") return default_threshold_grid();
  std::vector<double> values;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      values.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ValidationError("bad threshold value '" + item + "'");
    }
  }
  return normalize_threshold_grid(values);
}

json grid_json(const std::vector<std::optional<double>>& grid) { return threshold_grid_to_json(grid); }

std::optional<GoldAlignment> resolve_gold(const std::string& spec, std::size_t n_queries,
                                          std::size_t n_targets) {
  if (spec == "none") return std::nullopt;
  if (spec == "identity") {
    if (n_queries != n_targets) {
      throw ValidationError("identity gold needs equal query and target counts (" +
                            std::to_string(n_queries) + " vs " + std::to_string(n_targets) + ")");
    }
    return GoldAlignment::identity(n_queries);
  }
  return load_gold_tsv(spec, n_queries, n_targets);
}

void check_sentence_file(const std::string& path, std::size_t rows, const std::string& side,
                         std::ostream& err) {
  if (path.empty()) return;
  const auto corpus = load_sentences(path);
  check_counts(corpus.size(), rows, side + " sentences vs embeddings");
  if (corpus.empty_lines > 0) {
    err << "warning: " << path << " has " << corpus.empty_lines << " empty line(s)\n";
  }
}

void write_json(const json& j, const std::string& path) {
  if (path.empty()) return;
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write failure on " + path);
}

void emit(const GlobalOptions& g, std::ostream& out, const json& summary,
          const std::vector<std::pair<std::string, std::string>>& lines) {
  if (g.format == "json") {
    out << summary.dump(2) << '\n';
    return;
  }
  for (const auto& [k, v] : lines) out << k << ": " << v << '\n';
}

json stamp(const char* command, const GlobalOptions& g, json config) {
  json j;
  j["command"] = command;
  j["seed"] = g.seed;
  j["config"] = config;
  j["config_hash"] = config_hash(config);
  return j;
}

// ---------------------------------------------------------------- align

struct AlignArgs {
  InputOptions input;
  std::string queries, targets, out, candidates, gold = "identity", summary;
  std::string query_sentences, target_sentences, model;
  std::string metric = "cosine";
  double threshold = kNoThresholdSentinel;
  CLI::Option* threshold_opt = nullptr;
  std::size_t k = 1;
  bool normalize = false;
};

int cmd_align(const AlignArgs& a, const GlobalOptions& g, std::ostream& out, std::ostream& err) {
  const Metric metric = parse_metric(a.metric);
  const auto threshold = threshold_arg(a.threshold_opt, a.threshold);
  if (threshold && metric != Metric::cosine) {
    throw ValidationError("--threshold is only supported with --metric cosine");
  }
  const auto opts = a.input.load_options();
  auto queries = load_embeddings(a.queries, opts);
  auto targets = load_embeddings(a.targets, opts);
  if (queries.dim() != targets.dim()) {
    throw ValidationError("queries have dim " + std::to_string(queries.dim()) +
                          " but targets have dim " + std::to_string(targets.dim()));
  }
  check_sentence_file(a.query_sentences, queries.count(), "query", err);
  check_sentence_file(a.target_sentences, targets.count(), "target", err);
  if (!a.model.empty()) targets = apply(load_adapter(a.model), targets, g.threads);
  if (a.normalize) {
    queries = normalize_rows(queries);
    targets = normalize_rows(targets);
  }
  std::string gold_spec = a.gold;
  if (gold_spec == "identity" && queries.count() != targets.count()) gold_spec = "none";
  const auto gold = resolve_gold(gold_spec, queries.count(), targets.count());

  const auto result = align(queries, targets, metric, threshold, a.k, {g.threads});
  write_alignment_tsv(result, a.out);
  if (!a.candidates.empty()) write_candidates_tsv(result.candidate_lists, a.candidates);

  json config = {{"queries", a.queries},   {"targets", a.targets}, {"metric", a.metric},
                 {"k", a.k},               {"gold", gold_spec},    {"normalize", a.normalize},
                 {"model", a.model},       {"input_format", a.input.format},
                 {"threshold", threshold ? json(*threshold) : json(nullptr)}};
  json summary = stamp("align", g, config);
  summary["n_queries"] = queries.count();
  summary["n_targets"] = targets.count();
  summary["dim"] = queries.dim();
  summary["aligned_count"] = result.pairs.size();
  std::vector<std::pair<std::string, std::string>> lines{
      {"queries", std::to_string(queries.count())},
      {"targets", std::to_string(targets.count())},
      {"aligned", std::to_string(result.pairs.size())}};
  if (gold) {
    for (std::size_t k = 1; k <= a.k; ++k) {
      const double acc = top_k_accuracy(result.candidate_lists, *gold, k);
      summary["top_k_accuracy"][std::to_string(k)] = acc;
      lines.emplace_back("top-" + std::to_string(k) + " accuracy", fmt6(acc));
    }
    const auto prf = precision_recall_f1(result, *gold);
    summary["precision"] = prf.precision ? json(*prf.precision) : json("n/a");
    summary["recall"] = prf.recall;
    summary["f1"] = prf.f1;
    lines.emplace_back("precision", opt6(prf.precision));
    lines.emplace_back("recall", fmt6(prf.recall));
    lines.emplace_back("f1", fmt6(prf.f1));
  }
  write_json(summary, a.summary);
  emit(g, out, summary, lines);
  return kSuccess;
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
  std::string candidates, alignment, gold, out, summary, ks = "1,3", thresholds = "default";
  std::string metric = "cosine";
  std::size_t n_queries = 0;
  std::size_t n_targets = 0;
};

std::vector<std::size_t> parse_ks(const std::string& spec) {
  std::vector<std::size_t> ks;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const long long k = std::stoll(item, &used);
      if (used != item.size() || k <= 0) throw std::invalid_argument(item);
      ks.push_back(static_cast<std::size_t>(k));
    } catch (const std::exception&) {
      throw ValidationError("bad k value '" + item + "'");
    }
  }
  std::sort(ks.begin(), ks.end());
  ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
  if (ks.empty()) throw ValidationError("no k values given");
  return ks;
}

int cmd_eval(const EvalArgs& a, const GlobalOptions& g, std::ostream& out, std::ostream&) {
  if (a.candidates.empty() && a.alignment.empty()) {
    throw ValidationError("eval needs --candidates and/or --alignment");
  }
  const Metric metric = parse_metric(a.metric);
  std::vector<CandidateList> lists;
  std::vector<AlignedPair> pairs;
  if (!a.candidates.empty()) lists = read_candidates_tsv(a.candidates);
  if (!a.alignment.empty()) {
    pairs = read_alignment_tsv(a.alignment);
  } else {
    for (const auto& l : lists) {
      if (l.candidates.empty()) continue;
      pairs.push_back({l.query_index, l.candidates.front().target_index, l.candidates.front().score});
    }
  }

  std::size_t n_queries = a.n_queries;
  if (n_queries == 0) n_queries = !lists.empty() ? lists.size() : pairs.size();
  GoldAlignment gold;
  if (a.gold == "identity") {
    gold = GoldAlignment::identity(n_queries);
  } else {
    const std::size_t n_targets =
        a.n_targets > 0 ? a.n_targets : std::numeric_limits<std::size_t>::max();
    gold = load_gold_tsv(a.gold, n_queries, n_targets);
  }

  const auto ks = parse_ks(a.ks);
  auto grid = parse_grid(a.thresholds);
  if (metric != Metric::cosine) grid = {std::nullopt};

  std::ofstream csv(a.out, std::ios::binary | std::ios::trunc);
  if (!csv) throw IoError("cannot open " + a.out + " for writing");
  csv << "measure,k_or_threshold,accuracy,precision,recall,f1,aligned_count\n";

  json config = {{"candidates", a.candidates}, {"alignment", a.alignment}, {"gold", a.gold},
                 {"ks", ks},                   {"metric", a.metric},       {"thresholds", grid_json(grid)},
                 {"n_queries", n_queries}};
  json summary = stamp("eval", g, config);
  std::vector<std::pair<std::string, std::string>> lines;
  if (!lists.empty()) {
    for (std::size_t k : ks) {
      const double acc = top_k_accuracy(lists, gold, k);
      csv << "top_k," << k << "," << fmt6(acc) << ",,,,\n";
      summary["top_k_accuracy"][std::to_string(k)] = acc;
      lines.emplace_back("top-" + std::to_string(k) + " accuracy", fmt6(acc));
    }
  }
  json rows = json::array();
  for (const auto& row : threshold_curve(pairs, gold, grid)) {
    const auto& s = row.scores;
    csv << "threshold," << threshold_label(row.threshold) << ",," << opt6(s.precision) << ","
        << fmt6(s.recall) << "," << fmt6(s.f1) << "," << s.aligned_count << "\n";
    rows.push_back({{"threshold", row.threshold ? json(*row.threshold) : json(nullptr)},
                    {"precision", s.precision ? json(*s.precision) : json("n/a")},
                    {"recall", s.recall},
                    {"f1", s.f1},
                    {"aligned_count", s.aligned_count}});
    if (!row.threshold) {
      lines.emplace_back("precision", opt6(s.precision));
      lines.emplace_back("recall", fmt6(s.recall));
      lines.emplace_back("f1", fmt6(s.f1));
    }
  }
  summary["thresholds"] = rows;
  if (!csv) throw IoError("write failure on " + a.out);
  write_json(summary, a.summary);
  emit(g, out, summary, lines);
  return kSuccess;
}

// ---------------------------------------------------------------- finetune

struct FinetuneArgs {
  InputOptions input;
  std::string source, target, out, history, summary;
  std::size_t hidden = 96;
  std::string activation = "relu";
  std::string optimizer = "adam";
  TrainConfig train;
  bool no_shuffle = false;
};

int cmd_finetune(const FinetuneArgs& a, const GlobalOptions& g, std::ostream& out,
                 std::ostream& err) {
  const auto opts = a.input.load_options();
  const auto sources = load_embeddings(a.source, opts);
  const auto targets = load_embeddings(a.target, opts);
  if (sources.dim() != targets.dim()) {
    throw ValidationError("source has dim " + std::to_string(sources.dim()) +
                          " but target has dim " + std::to_string(targets.dim()));
  }
  check_counts(sources.count(), targets.count(), "finetune source vs target");

  TrainConfig config = a.train;
  config.seed = g.seed;
  config.threads = g.threads;
  config.shuffle_each_epoch = !a.no_shuffle;
  config.optimizer = a.optimizer == "sgd" ? OptimizerKind::sgd : OptimizerKind::adam;
  const Activation act = parse_activation(a.activation);

  auto model = init_adapter(sources.dim(), a.hidden, act, g.seed);
  const auto result = train(std::move(model), sources, targets, config);
  save_adapter(result.model, a.out);

  if (!a.history.empty()) {
    std::ofstream csv(a.history, std::ios::binary | std::ios::trunc);
    if (!csv) throw IoError("cannot open " + a.history + " for writing");
    csv << "epoch,mean_loss\n";
    char buf[32];
    for (std::size_t e = 0; e < result.history.epoch_mean_loss.size(); ++e) {
      std::snprintf(buf, sizeof buf, "%.9f", result.history.epoch_mean_loss[e]);
      csv << e + 1 << "," << buf << "\n";
    }
    std::snprintf(buf, sizeof buf, "%.9f", result.history.final_mean_loss);
    csv << "final," << buf << "\n";
    if (!csv) throw IoError("write failure on " + a.history);
  }
  if (result.history.collapse_warning) {
    err << "warning: adapted embeddings collapsed (mean pairwise cosine "
        << fmt6(result.history.mean_pairwise_cosine) << ")\n";
  }

  json config_json = {{"source", a.source},
                      {"target", a.target},
                      {"hidden", a.hidden},
                      {"activation", a.activation},
                      {"optimizer", a.optimizer},
                      {"learning_rate", config.learning_rate},
                      {"epochs", config.epochs},
                      {"batch_size", config.batch_size},
                      {"beta1", config.beta1},
                      {"beta2", config.beta2},
                      {"epsilon", config.epsilon},
                      {"shuffle_each_epoch", config.shuffle_each_epoch}};
  json summary = stamp("finetune", g, config_json);
  summary["pairs"] = sources.count();
  summary["dim"] = sources.dim();
  summary["parameters"] = result.model.parameter_count();
  summary["epoch_mean_loss"] = result.history.epoch_mean_loss;
  summary["final_mean_loss"] = result.history.final_mean_loss;
  summary["mean_pairwise_cosine"] = result.history.mean_pairwise_cosine;
  summary["collapse_warning"] = result.history.collapse_warning;
  summary["wall_seconds"] = result.history.wall_seconds;
  write_json(summary, a.summary);
  emit(g, out, summary,
       {{"pairs", std::to_string(sources.count())},
        {"parameters", std::to_string(result.model.parameter_count())},
        {"first epoch loss", fmt6(result.history.epoch_mean_loss.front())},
        {"final loss", fmt6(result.history.final_mean_loss)},
        {"checkpoint", a.out}});
  return kSuccess;
}

// ---------------------------------------------------------------- apply

struct ApplyArgs {
  InputOptions input;
  std::string model, in, out;
};

int cmd_apply(const ApplyArgs& a, const GlobalOptions& g, std::ostream& out, std::ostream&) {
  const auto model = load_adapter(a.model);
  const auto m = load_embeddings(a.in, a.input.load_options());
  if (m.dim() != model.d) {
    throw ValidationError("embeddings have dim " + std::to_string(m.dim()) +
                          " but the adapter expects dim " + std::to_string(model.d));
  }
  const auto adapted = apply(model, m, g.threads);
  save_embeddings(adapted, a.out);
  json summary = stamp("apply", g, {{"model", a.model}, {"in", a.in}, {"out", a.out}});
  summary["rows"] = adapted.count();
  summary["dim"] = adapted.dim();
  emit(g, out, summary, {{"rows", std::to_string(adapted.count())}, {"written", a.out}});
  return kSuccess;
}

// ---------------------------------------------------------------- sweep

struct SweepArgs {
  std::string plan, out_dir, source, target, gold, metric, activation, optimizer;
  std::string fractions, hidden_sizes, ks, thresholds;
  std::size_t folds = 0, epochs = 0, batch_size = 0;
  double lr = 0.0;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* threads_opt = nullptr;
};

template <typename T>
std::vector<T> parse_list(const std::string& spec, const char* what) {
  std::vector<T> values;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::istringstream is(item);
    T v{};
    if (!(is >> v) || !is.eof()) throw ValidationError(std::string("bad ") + what + " value '" + item + "'");
    values.push_back(v);
  }
  return values;
}

int cmd_sweep(const SweepArgs& a, const GlobalOptions& g, std::ostream& out, std::ostream& err) {
  ExperimentPlan plan;
  if (!a.plan.empty()) plan = load_plan(a.plan);
  if (!a.source.empty()) plan.source_embeddings = a.source;
  if (!a.target.empty()) plan.target_embeddings = a.target;
  if (!a.gold.empty()) plan.gold = a.gold;
  if (!a.metric.empty()) plan.metric = parse_metric(a.metric);
  if (!a.activation.empty()) plan.activation = parse_activation(a.activation);
  if (!a.optimizer.empty()) {
    plan.train.optimizer = a.optimizer == "sgd" ? OptimizerKind::sgd : OptimizerKind::adam;
  }
  if (!a.fractions.empty()) plan.fractions = parse_list<double>(a.fractions, "fraction");
  if (!a.hidden_sizes.empty()) plan.hidden_sizes = parse_list<std::size_t>(a.hidden_sizes, "hidden size");
  if (!a.ks.empty()) plan.ks = parse_ks(a.ks);
  if (!a.thresholds.empty()) plan.thresholds = parse_grid(a.thresholds);
  if (a.folds) plan.k_folds = a.folds;
  if (a.epochs) plan.train.epochs = a.epochs;
  if (a.batch_size) plan.train.batch_size = a.batch_size;
  if (a.lr > 0.0) plan.train.learning_rate = a.lr;
  if (a.seed_opt->count()) plan.seed = g.seed;
  if (a.threads_opt->count()) plan.threads = g.threads;

  const auto result = run_sweep(plan);
  fs::create_directories(a.out_dir);
  const fs::path dir(a.out_dir);
  write_cells_csv(result, dir / "cells.csv");
  write_summary_csv(result, dir / "summary.csv");
  const json summary = summary_json(result);
  write_json(summary, (dir / "summary.json").string());
  write_json(to_json(plan), (dir / "plan.json").string());
  for (const auto& w : summary["warnings"]) err << "warning: " << w.get<std::string>() << '\n';

  std::vector<std::pair<std::string, std::string>> lines{
      {"plan hash", result.plan_hash},
      {"cells", std::to_string(result.cells.size())},
      {"output", a.out_dir}};
  for (const auto& cell : summary["cells"]) {
    std::string label = "fraction " + fmt6(cell["fraction"].get<double>()).substr(0, 4) + " h " +
                        std::to_string(cell["hidden_size"].get<std::size_t>());
    std::string value;
    for (const auto& [k, s] : cell["top_k"].items()) {
      value += "top-" + k + " " + fmt6(s["mean"].get<double>()) + " +/- " +
               fmt6(s["std"].get<double>()) + "  ";
    }
    lines.emplace_back(label, value);
  }
  emit(g, out, summary, lines);
  return kSuccess;
}

// ---------------------------------------------------------------- curve

struct CurveArgs {
  InputOptions input;
  std::string queries, targets, model, gold = "identity", thresholds = "default", out, summary;
};

int cmd_curve(const CurveArgs& a, const GlobalOptions& g, std::ostream& out, std::ostream&) {
  const auto opts = a.input.load_options();
  const auto queries = load_embeddings(a.queries, opts);
  auto targets = load_embeddings(a.targets, opts);
  if (queries.dim() != targets.dim()) {
    throw ValidationError("queries have dim " + std::to_string(queries.dim()) +
                          " but targets have dim " + std::to_string(targets.dim()));
  }
  if (!a.model.empty()) targets = apply(load_adapter(a.model), targets, g.threads);
  const auto gold = resolve_gold(a.gold, queries.count(), targets.count());
  if (!gold) throw ValidationError("curve needs a gold alignment");
  const auto grid = parse_grid(a.thresholds);
  const auto base = align(queries, targets, Metric::cosine, std::nullopt, 1, {g.threads});
  const auto rows = threshold_curve(base.pairs, *gold, grid);

  std::ofstream csv(a.out, std::ios::binary | std::ios::trunc);
  if (!csv) throw IoError("cannot open " + a.out + " for writing");
  csv << "threshold,precision,recall,f1,aligned_count\n";
  json jrows = json::array();
  for (const auto& row : rows) {
    const auto& s = row.scores;
    csv << threshold_label(row.threshold) << "," << opt6(s.precision) << "," << fmt6(s.recall)
        << "," << fmt6(s.f1) << "," << s.aligned_count << "\n";
    jrows.push_back({{"threshold", row.threshold ? json(*row.threshold) : json(nullptr)},
                     {"precision", s.precision ? json(*s.precision) : json("n/a")},
                     {"recall", s.recall},
                     {"f1", s.f1},
                     {"aligned_count", s.aligned_count}});
  }
  if (!csv) throw IoError("write failure on " + a.out);
  json summary = stamp("curve", g,
                       {{"queries", a.queries}, {"targets", a.targets}, {"model", a.model},
                        {"gold", a.gold}, {"thresholds", grid_json(grid)}});
  summary["rows"] = jrows;
  write_json(summary, a.summary);
  emit(g, out, summary, {{"rows", std::to_string(rows.size())}, {"written", a.out}});
  return kSuccess;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Bitext mining over sentence embeddings: align, evaluate, fine-tune, sweep"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions g;
  auto* seed_opt = app.add_option("--seed", g.seed, "Random seed")->capture_default_str();
  auto* threads_opt = app.add_option("--threads", g.threads, "Worker threads")
                          ->check(CLI::PositiveNumber)
                          ->capture_default_str();
  app.add_option("--format", g.format, "Stdout summary format")
      ->check(CLI::IsMember({"text", "json"}))
      ->capture_default_str();

  const auto metric_check = CLI::IsMember({"cosine", "cos", "euclidean", "l2"});

  AlignArgs al;
  auto* align_cmd = app.add_subcommand("align", "Align each query row to its best target rows");
  al.input.add_to(align_cmd);
  align_cmd->add_option("--queries", al.queries, "Query embeddings (reference side)")->required();
  align_cmd->add_option("--targets", al.targets, "Target embeddings")->required();
  align_cmd->add_option("--out", al.out, "Alignment TSV")->required();
  align_cmd->add_option("--candidates", al.candidates, "Top-k candidate TSV");
  align_cmd->add_option("--metric", al.metric)->check(metric_check)->capture_default_str();
  al.threshold_opt = align_cmd->add_option(
      "--threshold", al.threshold, "Cosine threshold; -0.2 or lower means no threshold");
  align_cmd->add_option("--k", al.k, "Candidates kept per query")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  align_cmd->add_option("--gold", al.gold, "identity, none, or a gold TSV")->capture_default_str();
  align_cmd->add_option("--query-sentences", al.query_sentences, "Sentence file for the queries");
  align_cmd->add_option("--target-sentences", al.target_sentences, "Sentence file for the targets");
  align_cmd->add_option("--model", al.model, "ADP1 adapter applied to the targets first");
  align_cmd->add_flag("--normalize", al.normalize, "L2-normalise rows before scoring");
  align_cmd->add_option("--summary", al.summary, "JSON summary path");

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Score candidates/alignments against gold");
  eval_cmd->add_option("--candidates", ev.candidates, "Candidate TSV from align --candidates");
  eval_cmd->add_option("--alignment", ev.alignment, "Unfiltered alignment TSV from align");
  eval_cmd->add_option("--gold", ev.gold, "identity or a gold TSV")->required();
  eval_cmd->add_option("--n-queries", ev.n_queries, "Number of queries (default: from input)");
  eval_cmd->add_option("--n-targets", ev.n_targets, "Number of targets (bounds gold TSV indices)");
  eval_cmd->add_option("--ks", ev.ks, "Comma-separated k values")->capture_default_str();
  eval_cmd->add_option("--thresholds", ev.thresholds, "'default' or comma-separated values")
      ->capture_default_str();
  eval_cmd->add_option("--metric", ev.metric, "Metric the scores came from")
      ->check(metric_check)
      ->capture_default_str();
  eval_cmd->add_option("--out", ev.out, "Report CSV")->required();
  eval_cmd->add_option("--summary", ev.summary, "JSON summary path");

  FinetuneArgs ft;
  auto* ft_cmd = app.add_subcommand("finetune", "Train a bottleneck adapter on parallel pairs");
  ft.input.add_to(ft_cmd);
  ft_cmd->add_option("--source", ft.source, "Embeddings the adapter transforms")->required();
  ft_cmd->add_option("--target", ft.target, "Reference embeddings (row-aligned)")->required();
  ft_cmd->add_option("--out", ft.out, "ADP1 checkpoint")->required();
  ft_cmd->add_option("--hidden", ft.hidden, "Bottleneck size")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  ft_cmd->add_option("--activation", ft.activation)
      ->check(CLI::IsMember({"relu", "identity"}))
      ->capture_default_str();
  ft_cmd->add_option("--optimizer", ft.optimizer)
      ->check(CLI::IsMember({"adam", "sgd"}))
      ->capture_default_str();
  ft_cmd->add_option("--lr", ft.train.learning_rate)->check(CLI::PositiveNumber)->capture_default_str();
  ft_cmd->add_option("--epochs", ft.train.epochs)->check(CLI::PositiveNumber)->capture_default_str();
  ft_cmd->add_option("--batch-size", ft.train.batch_size)
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  ft_cmd->add_option("--beta1", ft.train.beta1)->capture_default_str();
  ft_cmd->add_option("--beta2", ft.train.beta2)->capture_default_str();
  ft_cmd->add_option("--epsilon", ft.train.epsilon)->capture_default_str();
  ft_cmd->add_flag("--no-shuffle", ft.no_shuffle, "Keep row order every epoch");
  ft_cmd->add_option("--history", ft.history, "Per-epoch loss CSV");
  ft_cmd->add_option("--summary", ft.summary, "JSON summary path");

  ApplyArgs ap;
  auto* apply_cmd = app.add_subcommand("apply", "Transform embeddings with a trained adapter");
  ap.input.add_to(apply_cmd);
  apply_cmd->add_option("--model", ap.model, "ADP1 checkpoint")->required();
  apply_cmd->add_option("--in", ap.in, "Input embeddings")->required();
  apply_cmd->add_option("--out", ap.out, "Output EMB1 file")->required();

  SweepArgs sw;
  sw.seed_opt = seed_opt;
  sw.threads_opt = threads_opt;
  auto* sweep_cmd = app.add_subcommand("sweep", "Cross-validated fraction x hidden-size sweep");
  sweep_cmd->add_option("--plan", sw.plan, "JSON experiment plan");
  sweep_cmd->add_option("--out-dir", sw.out_dir, "Directory for CSV/JSON outputs")->required();
  sweep_cmd->add_option("--source", sw.source, "Override: source embeddings");
  sweep_cmd->add_option("--target", sw.target, "Override: target embeddings");
  sweep_cmd->add_option("--gold", sw.gold, "Override: identity or gold TSV");
  sweep_cmd->add_option("--metric", sw.metric, "Override: metric")->check(metric_check);
  sweep_cmd->add_option("--activation", sw.activation)->check(CLI::IsMember({"relu", "identity"}));
  sweep_cmd->add_option("--optimizer", sw.optimizer)->check(CLI::IsMember({"adam", "sgd"}));
  sweep_cmd->add_option("--folds", sw.folds, "Override: number of folds");
  sweep_cmd->add_option("--fractions", sw.fractions, "Override: comma-separated fractions");
  sweep_cmd->add_option("--hidden-sizes", sw.hidden_sizes, "Override: comma-separated sizes");
  sweep_cmd->add_option("--ks", sw.ks, "Override: comma-separated k values");
  sweep_cmd->add_option("--thresholds", sw.thresholds, "Override: threshold grid");
  sweep_cmd->add_option("--epochs", sw.epochs, "Override: epochs");
  sweep_cmd->add_option("--batch-size", sw.batch_size, "Override: batch size");
  sweep_cmd->add_option("--lr", sw.lr, "Override: learning rate");

  CurveArgs cv;
  auto* curve_cmd = app.add_subcommand("curve", "Precision/recall/F1 across cosine thresholds");
  cv.input.add_to(curve_cmd);
  curve_cmd->add_option("--queries", cv.queries, "Query embeddings")->required();
  curve_cmd->add_option("--targets", cv.targets, "Target embeddings")->required();
  curve_cmd->add_option("--model", cv.model, "ADP1 adapter applied to the targets first");
  curve_cmd->add_option("--gold", cv.gold, "identity or a gold TSV")->capture_default_str();
  curve_cmd->add_option("--thresholds", cv.thresholds, "'default' or comma-separated values")
      ->capture_default_str();
  curve_cmd->add_option("--out", cv.out, "Curve CSV")->required();
  curve_cmd->add_option("--summary", cv.summary, "JSON summary path");

  std::vector<const char*> argv;
  argv.reserve(args.size());
  for (const auto& s : args) argv.push_back(s.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kSuccess;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kSuccess;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kValidationFailure;
  }

  try {
    if (align_cmd->parsed()) return cmd_align(al, g, out, err);
    if (eval_cmd->parsed()) return cmd_eval(ev, g, out, err);
    if (ft_cmd->parsed()) return cmd_finetune(ft, g, out, err);
    if (apply_cmd->parsed()) return cmd_apply(ap, g, out, err);
    if (sweep_cmd->parsed()) return cmd_sweep(sw, g, out, err);
    if (curve_cmd->parsed()) return cmd_curve(cv, g, out, err);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kValidationFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kRuntimeFailure;
  }
  return kValidationFailure;
}

}  // namespace bitext::cli
