#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "bitext/corpus_io.hpp"
#include "bitext/embedding_core.hpp"
#include "bitext/eval.hpp"
#include "bitext/finetune.hpp"

namespace bitext {

/// Declarative description of a fold x fraction x hidden-size sweep.
///
/// "source" is the side the adapter transforms; "target" is the frozen
/// reference side, which also supplies the alignment queries. The gold maps
/// target (query) index -> source index.
struct ExperimentPlan {
  std::string source_embeddings;
  std::string target_embeddings;
  EmbeddingFormat embedding_format = EmbeddingFormat::emb1;
  std::optional<std::size_t> raw_dim;
  /// "identity" or a path to a gold TSV.
  std::string gold = "identity";
  Metric metric = Metric::cosine;
  std::vector<std::size_t> ks{1, 3};
  std::vector<std::optional<double>> thresholds = default_threshold_grid();
  std::size_t k_folds = 5;
  std::uint64_t seed = 0;
  std::vector<double> fractions{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  std::vector<std::size_t> hidden_sizes{32, 64, 96, 128, 256};
  Activation activation = Activation::relu;
  TrainConfig train;
  /// Cells evaluated concurrently. Output does not depend on it.
  std::size_t threads = 1;

  void validate() const;
};

nlohmann::json to_json(const ExperimentPlan& plan);
/// Missing keys keep their defaults; unknown keys are rejected.
ExperimentPlan plan_from_json(const nlohmann::json& j);
ExperimentPlan load_plan(const std::filesystem::path& path);

/// FNV-1a 64 of the canonical JSON dump, as 16 hex digits.
std::string config_hash(const nlohmann::json& config);

/// Thresholds at or below the no-threshold sentinel become unset; the result
/// is sorted ascending with the unset entry first and duplicates removed.
std::vector<std::optional<double>> normalize_threshold_grid(const std::vector<double>& values);
nlohmann::json threshold_grid_to_json(const std::vector<std::optional<double>>& grid);

struct SweepCell {
  std::size_t fold = 0;
  double fraction = 0.0;
  std::size_t hidden_size = 0;
  std::size_t train_size = 0;
  double final_loss = 0.0;
  bool collapse_warning = false;
  EvalReport report;
};

struct SweepResult {
  ExperimentPlan plan;
  std::string plan_hash;
  std::size_t n_pairs = 0;
  std::vector<std::size_t> fold_sizes;
  /// Raw-embedding evaluation on each held-out fold, indexed by fold.
  std::vector<EvalReport> zero_shot;
  /// Ordered by (fold, fraction index, hidden size index).
  std::vector<SweepCell> cells;
  double wall_seconds = 0.0;
};

/// Runs the sweep on in-memory pairs. `gold` maps target (query) rows to
/// source rows.
SweepResult run_sweep(const ExperimentPlan& plan, const EmbeddingMatrix& sources,
                      const EmbeddingMatrix& targets, const GoldAlignment& gold);

/// Loads the plan's inputs and runs the sweep.
SweepResult run_sweep(const ExperimentPlan& plan);

/// Long-form per-cell CSV: one row per (fold, fraction, hidden_size, k or threshold).
void write_cells_csv(const SweepResult& result, const std::filesystem::path& path);
/// Mean and sample standard deviation across folds per (fraction, hidden_size, k or threshold).
void write_summary_csv(const SweepResult& result, const std::filesystem::path& path);
nlohmann::json summary_json(const SweepResult& result);

/// Text of a CSV threshold label: the unset threshold prints as the -0.2
/// sentinel.
std::string threshold_label(const std::optional<double>& threshold);

}  // namespace bitext
