#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "bitext/corpus_io.hpp"

namespace bitext {

/// Cosine scores are similarities (higher is better); Euclidean scores are
/// distances (lower is better).
enum class Metric { cosine, euclidean };

std::string_view to_string(Metric metric) noexcept;
/// Accepts "cosine"/"cos" and "euclidean"/"l2".
Metric parse_metric(std::string_view name);

/// True if score `a` ranks strictly ahead of score `b` under `metric`.
constexpr bool better(Metric metric, double a, double b) noexcept {
  return metric == Metric::cosine ? a > b : a < b;
}

/// Dot product accumulated in double.
double dot(std::span<const float> u, std::span<const float> v);
double l2_norm(std::span<const float> u);

/// u.v / (|u||v|), accumulated in double and clamped to [-1, 1].
/// Throws DimensionMismatch or ZeroNormError.
double cosine_similarity(std::span<const float> u, std::span<const float> v);

double euclidean_distance(std::span<const float> u, std::span<const float> v);

/// Rows scaled to unit L2 norm. Throws ZeroNormError naming the first zero row.
EmbeddingMatrix normalize_rows(const EmbeddingMatrix& m);

/// Dense n_queries x n_targets score array, row-major.
struct ScoreMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  double at(std::size_t i, std::size_t j) const { return values[i * cols + j]; }
  std::span<const double> row(std::size_t i) const { return {values.data() + i * cols, cols}; }
};

struct ScoreOptions {
  /// Query rows per tile.
  std::size_t block_rows = 64;
  std::size_t threads = 1;
};

/// Pairwise scores between query and target rows. Output is bitwise
/// independent of block size and thread count.
ScoreMatrix score_matrix(const EmbeddingMatrix& queries, const EmbeddingMatrix& targets,
                         Metric metric, const ScoreOptions& options = {});

/// Streams the same scores one query row at a time into `out` (size n_targets)
/// without materialising the full matrix. `target_norms` must come from
/// row_norms(targets) when metric is cosine.
void score_row(std::span<const float> query, const EmbeddingMatrix& targets,
               std::span<const double> target_norms, Metric metric, std::span<double> out);

/// L2 norm of every row; throws ZeroNormError on a zero row if `require_nonzero`.
std::vector<double> row_norms(const EmbeddingMatrix& m, bool require_nonzero,
                              std::string_view what = "row_norms");

}  // namespace bitext
