#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "bitext/corpus_io.hpp"
#include "bitext/knn_aligner.hpp"

namespace bitext {

struct PrecisionRecall {
  /// Unset when the alignment is empty (reported as "n/a").
  std::optional<double> precision;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t aligned_count = 0;
  std::size_t correct_count = 0;
};

struct ThresholdRow {
  /// Unset means no threshold.
  std::optional<double> threshold;
  PrecisionRecall scores;
};

struct EvalReport {
  std::map<std::size_t, double> top_k_accuracy;
  std::vector<ThresholdRow> threshold_rows;
  std::size_t n_queries = 0;
};

/// Fraction of queries whose gold target index is among their first k
/// candidates. Exact index match only.
double top_k_accuracy(std::span<const CandidateList> candidates, const GoldAlignment& gold,
                      std::size_t k);

PrecisionRecall precision_recall_f1(const AlignmentResult& alignment, const GoldAlignment& gold);
/// Same, for pairs read back from a file.
PrecisionRecall precision_recall_f1(std::span<const AlignedPair> pairs, const GoldAlignment& gold);

/// Pairs whose score is >= threshold (all pairs when unset).
std::vector<AlignedPair> filter_pairs(std::span<const AlignedPair> pairs,
                                      std::optional<double> threshold);

/// No-threshold sentinel followed by 0.00, 0.05, ..., 0.95.
std::vector<std::optional<double>> default_threshold_grid();

/// One row per grid entry, in grid order. The grid must be strictly ascending
/// with the unset entry (if any) first.
std::vector<ThresholdRow> threshold_curve(std::span<const AlignedPair> unfiltered_pairs,
                                          const GoldAlignment& gold,
                                          std::span<const std::optional<double>> grid);

EvalReport evaluate(const AlignmentResult& unfiltered, const GoldAlignment& gold,
                    std::span<const std::size_t> ks,
                    std::span<const std::optional<double>> grid);

struct FoldPlan {
  std::size_t n = 0;
  std::size_t k_folds = 0;
  std::uint64_t seed = 0;
  /// Disjoint, covering 0..n-1; sizes differ by at most one (larger first).
  std::vector<std::vector<std::size_t>> folds;

  /// Every index outside fold `f`, in fold order then within-fold order.
  std::vector<std::size_t> training_indices(std::size_t f) const;
};

FoldPlan make_folds(std::size_t n, std::size_t k_folds, std::uint64_t seed);

/// First ceil(fraction * |train|) entries. Prefixes of increasing fraction
/// are nested.
std::vector<std::size_t> training_prefix(std::span<const std::size_t> train_indices,
                                         double fraction);

/// ceil(fraction * n), ignoring binary rounding noise in the product
/// (0.3 * 10 gives 3, not 4).
std::size_t prefix_length(std::size_t n, double fraction);

struct MeanStd {
  double mean = 0.0;
  /// Sample standard deviation (n - 1 denominator); 0 for a single value.
  double stddev = 0.0;
  std::size_t n = 0;
};

MeanStd mean_std(std::span<const double> values);

}  // namespace bitext
