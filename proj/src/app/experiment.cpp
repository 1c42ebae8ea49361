#include "bitext/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include "bitext/errors.hpp"
#include "bitext/knn_aligner.hpp"
#include "bitext/parallel.hpp"
#include "bitext/random.hpp"

namespace bitext {

using nlohmann::json;

namespace {

std::string fmt(const char* spec, double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, value);
  return buf;
}

std::string format_name(EmbeddingFormat f) { return f == EmbeddingFormat::emb1 ? "emb1" : "raw_f32"; }

EmbeddingFormat parse_format(const std::string& name) {
  if (name == "emb1") return EmbeddingFormat::emb1;
  if (name == "raw_f32") return EmbeddingFormat::raw_f32;
  throw ValidationError("unknown embedding format '" + name + "' (expected emb1 or raw_f32)");
}

std::string optimizer_name(OptimizerKind k) { return k == OptimizerKind::adam ? "adam" : "sgd"; }

OptimizerKind parse_optimizer(const std::string& name) {
  if (name == "adam") return OptimizerKind::adam;
  if (name == "sgd") return OptimizerKind::sgd;
  throw ValidationError("unknown optimizer '" + name + "' (expected adam or sgd)");
}

json mean_std_json(const MeanStd& s) { return {{"mean", s.mean}, {"std", s.stddev}, {"n", s.n}}; }

template <typename T>
void take(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

std::string threshold_label(const std::optional<double>& threshold) {
  return threshold ? fmt("%.4g", *threshold) : fmt("%.4g", kNoThresholdSentinel);
}

std::vector<std::optional<double>> normalize_threshold_grid(const std::vector<double>& values) {
  bool has_none = false;
  std::set<double> numeric;
  for (double v : values) {
    if (!std::isfinite(v)) throw ValidationError("threshold values must be finite");
    if (v <= kNoThresholdSentinel + 1e-12) {
      has_none = true;
    } else {
      numeric.insert(v);
    }
  }
  std::vector<std::optional<double>> grid;
  if (has_none) grid.emplace_back(std::nullopt);
  grid.insert(grid.end(), numeric.begin(), numeric.end());
  return grid;
}

json threshold_grid_to_json(const std::vector<std::optional<double>>& grid) {
  json arr = json::array();
  for (const auto& t : grid) arr.push_back(t ? *t : kNoThresholdSentinel);
  return arr;
}

void ExperimentPlan::validate() const {
  if (source_embeddings.empty() || target_embeddings.empty()) {
    throw ValidationError("plan: source_embeddings and target_embeddings are required");
  }
  if (embedding_format == EmbeddingFormat::raw_f32 && !raw_dim) {
    throw ValidationError("plan: raw_f32 input requires raw_dim");
  }
  if (ks.empty()) throw ValidationError("plan: ks must not be empty");
  for (auto k : ks) {
    if (k == 0) throw ValidationError("plan: every k must be positive");
  }
  if (k_folds < 2) throw ValidationError("plan: k_folds must be at least 2");
  if (fractions.empty()) throw ValidationError("plan: fractions must not be empty");
  for (double f : fractions) {
    if (!(f > 0.0 && f <= 1.0)) throw ValidationError("plan: fractions must lie in (0, 1]");
  }
  if (std::set<double>(fractions.begin(), fractions.end()).size() != fractions.size()) {
    throw ValidationError("plan: fractions must be distinct");
  }
  if (hidden_sizes.empty()) throw ValidationError("plan: hidden_sizes must not be empty");
  if (std::set<std::size_t>(hidden_sizes.begin(), hidden_sizes.end()).size() != hidden_sizes.size()) {
    throw ValidationError("plan: hidden_sizes must be distinct");
  }
  for (auto h : hidden_sizes) {
    if (h == 0) throw ValidationError("plan: hidden sizes must be positive");
  }
  if (metric != Metric::cosine) {
    for (const auto& t : thresholds) {
      if (t) throw ValidationError("plan: thresholds are only supported with the cosine metric");
    }
  }
  if (train.epochs == 0 || train.batch_size == 0 || !(train.learning_rate > 0.0)) {
    throw ValidationError("plan: train.epochs, train.batch_size and train.learning_rate must be positive");
  }
}

json to_json(const ExperimentPlan& p) {
  json j;
  j["source_embeddings"] = p.source_embeddings;
  j["target_embeddings"] = p.target_embeddings;
  j["embedding_format"] = format_name(p.embedding_format);
  j["raw_dim"] = p.raw_dim ? json(*p.raw_dim) : json(nullptr);
  j["gold"] = p.gold;
  j["metric"] = std::string(to_string(p.metric));
  j["ks"] = p.ks;
  j["thresholds"] = threshold_grid_to_json(p.thresholds);
  j["k_folds"] = p.k_folds;
  j["seed"] = p.seed;
  j["fractions"] = p.fractions;
  j["hidden_sizes"] = p.hidden_sizes;
  j["activation"] = std::string(to_string(p.activation));
  j["train"] = {{"learning_rate", p.train.learning_rate},
                {"epochs", p.train.epochs},
                {"batch_size", p.train.batch_size},
                {"optimizer", optimizer_name(p.train.optimizer)},
                {"beta1", p.train.beta1},
                {"beta2", p.train.beta2},
                {"epsilon", p.train.epsilon},
                {"shuffle_each_epoch", p.train.shuffle_each_epoch}};
  j["threads"] = p.threads;
  return j;
}

ExperimentPlan plan_from_json(const json& j) {
  static const std::set<std::string> kKeys{
      "source_embeddings", "target_embeddings", "embedding_format", "raw_dim", "gold",
      "metric",           "ks",                "thresholds",       "k_folds", "seed",
      "fractions",        "hidden_sizes",      "activation",       "train",   "threads"};
  static const std::set<std::string> kTrainKeys{"learning_rate", "epochs", "batch_size",
                                                "optimizer",     "beta1",  "beta2",
                                                "epsilon",       "shuffle_each_epoch"};
  if (!j.is_object()) throw ValidationError("plan must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (!kKeys.count(key)) throw ValidationError("plan: unknown key '" + key + "'");
  }
  ExperimentPlan p;
  try {
    take(j, "source_embeddings", p.source_embeddings);
    take(j, "target_embeddings", p.target_embeddings);
    if (j.contains("embedding_format")) {
      p.embedding_format = parse_format(j.at("embedding_format").get<std::string>());
    }
    if (j.contains("raw_dim") && !j.at("raw_dim").is_null()) {
      p.raw_dim = j.at("raw_dim").get<std::size_t>();
    }
    take(j, "gold", p.gold);
    if (j.contains("metric")) p.metric = parse_metric(j.at("metric").get<std::string>());
    take(j, "ks", p.ks);
    if (j.contains("thresholds")) {
      p.thresholds = normalize_threshold_grid(j.at("thresholds").get<std::vector<double>>());
    }
    take(j, "k_folds", p.k_folds);
    take(j, "seed", p.seed);
    take(j, "fractions", p.fractions);
    take(j, "hidden_sizes", p.hidden_sizes);
    if (j.contains("activation")) {
      p.activation = parse_activation(j.at("activation").get<std::string>());
    }
    take(j, "threads", p.threads);
    if (j.contains("train")) {
      const auto& t = j.at("train");
      if (!t.is_object()) throw ValidationError("plan: train must be an object");
      for (const auto& [key, _] : t.items()) {
        if (!kTrainKeys.count(key)) throw ValidationError("plan: unknown train key '" + key + "'");
      }
      take(t, "learning_rate", p.train.learning_rate);
      take(t, "epochs", p.train.epochs);
      take(t, "batch_size", p.train.batch_size);
      if (t.contains("optimizer")) p.train.optimizer = parse_optimizer(t.at("optimizer").get<std::string>());
      take(t, "beta1", p.train.beta1);
      take(t, "beta2", p.train.beta2);
      take(t, "epsilon", p.train.epsilon);
      take(t, "shuffle_each_epoch", p.train.shuffle_each_epoch);
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("plan: ") + e.what());
  }
  return p;
}

ExperimentPlan load_plan(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open plan " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  return plan_from_json(j);
}

std::string config_hash(const json& config) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : config.dump()) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

SweepResult run_sweep(const ExperimentPlan& plan, const EmbeddingMatrix& sources,
                      const EmbeddingMatrix& targets, const GoldAlignment& gold) {
  plan.validate();
  if (sources.dim() != targets.dim()) {
    throw DimensionMismatch(targets.dim(), sources.dim(), "sweep: target vs source embeddings");
  }
  check_counts(gold.size(), targets.count(), "sweep: gold vs target embeddings");
  for (std::size_t q = 0; q < gold.size(); ++q) {
    if (gold.target_of[q] >= sources.count()) {
      throw ValidationError("sweep: gold source index " + std::to_string(gold.target_of[q]) +
                            " out of range");
    }
  }
  const auto started = std::chrono::steady_clock::now();
  const std::size_t kmax = *std::max_element(plan.ks.begin(), plan.ks.end());

  SweepResult result;
  result.plan = plan;
  auto hashed = to_json(plan);
  hashed.erase("threads");  // does not affect results
  result.plan_hash = config_hash(hashed);
  result.n_pairs = gold.size();

  const FoldPlan folds = make_folds(gold.size(), plan.k_folds, plan.seed);
  for (const auto& f : folds.folds) result.fold_sizes.push_back(f.size());
  for (std::size_t f = 0; f < folds.folds.size(); ++f) {
    if (folds.folds[f].size() < kmax) {
      throw ValidationError("sweep: fold " + std::to_string(f) + " has fewer rows than k=" +
                            std::to_string(kmax));
    }
  }

  auto source_rows = [&](std::span<const std::size_t> query_rows) {
    std::vector<std::size_t> rows(query_rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = gold.target_of[query_rows[i]];
    return rows;
  };

  // Held-out fold queries and their gold sources, in fold order; gold is the
  // identity within a fold.
  std::vector<EmbeddingMatrix> test_queries;
  std::vector<EmbeddingMatrix> test_sources;
  const auto& grid = plan.thresholds;
  for (std::size_t f = 0; f < folds.folds.size(); ++f) {
    test_queries.push_back(targets.gather(folds.folds[f]));
    test_sources.push_back(sources.gather(source_rows(folds.folds[f])));
    const auto fold_gold = GoldAlignment::identity(folds.folds[f].size());
    const auto raw = align(test_queries[f], test_sources[f], plan.metric, std::nullopt, kmax);
    result.zero_shot.push_back(evaluate(raw, fold_gold, plan.ks, grid));
  }

  struct CellSpec {
    std::size_t fold, fraction_index, hidden_index;
  };
  std::vector<CellSpec> specs;
  for (std::size_t f = 0; f < folds.folds.size(); ++f) {
    for (std::size_t fi = 0; fi < plan.fractions.size(); ++fi) {
      for (std::size_t hi = 0; hi < plan.hidden_sizes.size(); ++hi) specs.push_back({f, fi, hi});
    }
  }

  result.cells.resize(specs.size());
  parallel_for(specs.size(), plan.threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t c = begin; c < end; ++c) {
      const auto& spec = specs[c];
      const std::size_t h = plan.hidden_sizes[spec.hidden_index];
      const double fraction = plan.fractions[spec.fraction_index];
      SweepCell& cell = result.cells[c];
      cell.fold = spec.fold;
      cell.fraction = fraction;
      cell.hidden_size = h;
      try {
        const auto train_queries = training_prefix(folds.training_indices(spec.fold), fraction);
        cell.train_size = train_queries.size();
        const auto x_train = sources.gather(source_rows(train_queries));
        const auto y_train = targets.gather(train_queries);

        // Initialisation depends on (fold, h) only, so fractions differ by data alone.
        auto model = init_adapter(sources.dim(), h, plan.activation,
                                  derive_seed(plan.seed, {spec.fold, h}));
        TrainConfig config = plan.train;
        config.seed = derive_seed(plan.seed, {spec.fold, h, 1});
        config.threads = 1;
        auto trained = train(std::move(model), x_train, y_train, config);
        cell.final_loss = trained.history.final_mean_loss;
        cell.collapse_warning = trained.history.collapse_warning;

        const auto adapted = apply(trained.model, test_sources[spec.fold]);
        const auto alignment =
            align(test_queries[spec.fold], adapted, plan.metric, std::nullopt, kmax);
        cell.report = evaluate(alignment, GoldAlignment::identity(adapted.count()), plan.ks, grid);
      } catch (const Error& e) {
        const std::string where = "sweep cell (fold " + std::to_string(spec.fold) + ", fraction " +
                                  fmt("%g", fraction) + ", h " + std::to_string(h) + "): ";
        if (dynamic_cast<const ValidationError*>(&e)) throw ValidationError(where + e.what());
        throw Error(where + e.what());
      }
    }
  });
  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

SweepResult run_sweep(const ExperimentPlan& plan) {
  plan.validate();
  EmbeddingLoadOptions opts{plan.embedding_format, plan.raw_dim};
  const auto sources = load_embeddings(plan.source_embeddings, opts);
  const auto targets = load_embeddings(plan.target_embeddings, opts);
  const GoldAlignment gold = plan.gold == "identity"
                                 ? GoldAlignment::identity(targets.count())
                                 : load_gold_tsv(plan.gold, targets.count(), sources.count());
  if (plan.gold == "identity") check_counts(targets.count(), sources.count(), "sweep: identity gold");
  return run_sweep(plan, sources, targets, gold);
}

namespace {

constexpr const char* kCsvHeader =
    "fold,fraction,hidden_size,train_size,measure,k_or_threshold,accuracy,precision,recall,f1,"
    "aligned_count\n";

std::string opt_value(const std::optional<double>& v) { return v ? fmt("%.6f", *v) : "n/a"; }

}  // namespace

void write_cells_csv(const SweepResult& result, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << kCsvHeader;
  for (const auto& cell : result.cells) {
    const std::string prefix = std::to_string(cell.fold) + "," + fmt("%.2f", cell.fraction) + "," +
                               std::to_string(cell.hidden_size) + "," +
                               std::to_string(cell.train_size) + ",";
    for (const auto& [k, acc] : cell.report.top_k_accuracy) {
      out << prefix << "top_k," << k << "," << fmt("%.6f", acc) << ",,,,\n";
    }
    for (const auto& row : cell.report.threshold_rows) {
      out << prefix << "threshold," << threshold_label(row.threshold) << ",,"
          << opt_value(row.scores.precision) << "," << fmt("%.6f", row.scores.recall) << ","
          << fmt("%.6f", row.scores.f1) << "," << row.scores.aligned_count << "\n";
    }
  }
  if (!out) throw IoError("write failure on " + path.string());
}

namespace {

struct Aggregate {
  double fraction;
  std::size_t hidden_size;
  std::vector<const SweepCell*> folds;
};

std::vector<Aggregate> group_cells(const SweepResult& result) {
  std::vector<Aggregate> groups;
  for (double fraction : result.plan.fractions) {
    for (std::size_t h : result.plan.hidden_sizes) {
      Aggregate a{fraction, h, {}};
      for (const auto& cell : result.cells) {
        if (cell.fraction == fraction && cell.hidden_size == h) a.folds.push_back(&cell);
      }
      groups.push_back(std::move(a));
    }
  }
  return groups;
}

MeanStd stat_of(const std::vector<const EvalReport*>& reports, std::size_t k) {
  std::vector<double> v;
  for (const auto* r : reports) v.push_back(r->top_k_accuracy.at(k));
  return mean_std(v);
}

struct ThresholdStats {
  MeanStd precision, recall, f1, aligned_count;
};

ThresholdStats threshold_stats(const std::vector<const EvalReport*>& reports, std::size_t row) {
  std::vector<double> p, r, f, n;
  for (const auto* rep : reports) {
    const auto& s = rep->threshold_rows.at(row).scores;
    if (s.precision) p.push_back(*s.precision);
    r.push_back(s.recall);
    f.push_back(s.f1);
    n.push_back(static_cast<double>(s.aligned_count));
  }
  return {mean_std(p), mean_std(r), mean_std(f), mean_std(n)};
}

std::vector<const EvalReport*> reports_of(const Aggregate& a) {
  std::vector<const EvalReport*> out;
  for (const auto* c : a.folds) out.push_back(&c->report);
  return out;
}

}  // namespace

void write_summary_csv(const SweepResult& result, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "fraction,hidden_size,measure,k_or_threshold,field,mean,std,n\n";
  auto emit = [&](const std::string& prefix, const char* field, const MeanStd& s) {
    out << prefix << field << "," << (s.n ? fmt("%.6f", s.mean) : "n/a") << ","
        << (s.n ? fmt("%.6f", s.stddev) : "n/a") << "," << s.n << "\n";
  };
  std::vector<const EvalReport*> zero;
  for (const auto& r : result.zero_shot) zero.push_back(&r);
  auto emit_group = [&](const std::string& head, const std::vector<const EvalReport*>& reports) {
    for (std::size_t k : result.plan.ks) {
      emit(head + "top_k," + std::to_string(k) + ",", "accuracy", stat_of(reports, k));
    }
    const auto& rows = reports.front()->threshold_rows;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto s = threshold_stats(reports, i);
      const std::string p = head + "threshold," + threshold_label(rows[i].threshold) + ",";
      emit(p, "precision", s.precision);
      emit(p, "recall", s.recall);
      emit(p, "f1", s.f1);
      emit(p, "aligned_count", s.aligned_count);
    }
  };
  // Raw embeddings appear as fraction 0, hidden size 0.
  emit_group("0.00,0,", zero);
  for (const auto& a : group_cells(result)) {
    emit_group(fmt("%.2f", a.fraction) + "," + std::to_string(a.hidden_size) + ",", reports_of(a));
  }
  if (!out) throw IoError("write failure on " + path.string());
}

json summary_json(const SweepResult& result) {
  json j;
  j["plan_hash"] = result.plan_hash;
  j["seed"] = result.plan.seed;
  j["plan"] = to_json(result.plan);
  j["n_pairs"] = result.n_pairs;
  j["fold_sizes"] = result.fold_sizes;
  j["wall_seconds"] = result.wall_seconds;

  std::vector<const EvalReport*> zero;
  for (const auto& r : result.zero_shot) zero.push_back(&r);
  auto group_json = [&](const std::vector<const EvalReport*>& reports) {
    json g;
    for (std::size_t k : result.plan.ks) {
      std::vector<double> per_fold;
      for (const auto* r : reports) per_fold.push_back(r->top_k_accuracy.at(k));
      json entry = mean_std_json(mean_std(per_fold));
      entry["per_fold"] = per_fold;
      g["top_k"][std::to_string(k)] = entry;
    }
    json rows = json::array();
    const auto& first = reports.front()->threshold_rows;
    for (std::size_t i = 0; i < first.size(); ++i) {
      const auto s = threshold_stats(reports, i);
      rows.push_back({{"threshold", first[i].threshold ? json(*first[i].threshold) : json(nullptr)},
                      {"precision", mean_std_json(s.precision)},
                      {"recall", mean_std_json(s.recall)},
                      {"f1", mean_std_json(s.f1)},
                      {"aligned_count", mean_std_json(s.aligned_count)}});
    }
    g["thresholds"] = rows;
    return g;
  };
  j["zero_shot"] = group_json(zero);

  json cells = json::array();
  std::vector<std::string> warnings;
  for (const auto& a : group_cells(result)) {
    json c = group_json(reports_of(a));
    c["fraction"] = a.fraction;
    c["hidden_size"] = a.hidden_size;
    std::vector<double> losses;
    for (const auto* cell : a.folds) {
      losses.push_back(cell->final_loss);
      if (cell->collapse_warning) {
        warnings.push_back("adapted embeddings collapsed (mean pairwise cosine > 0.99) in fold " +
                           std::to_string(cell->fold) + ", fraction " + fmt("%g", a.fraction) +
                           ", h " + std::to_string(a.hidden_size));
      }
    }
    c["final_train_loss"] = mean_std_json(mean_std(losses));
    cells.push_back(std::move(c));
  }
  j["cells"] = std::move(cells);
  j["warnings"] = warnings;
  return j;
}

}  // namespace bitext
