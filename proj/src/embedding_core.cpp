#include "bitext/embedding_core.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "bitext/errors.hpp"
#include "bitext/parallel.hpp"

namespace bitext {

std::string_view to_string(Metric metric) noexcept {
  return metric == Metric::cosine ? "cosine" : "euclidean";
}

Metric parse_metric(std::string_view name) {
  if (name == "cosine" || name == "cos") return Metric::cosine;
  if (name == "euclidean" || name == "l2" || name == "L2") return Metric::euclidean;
  throw ValidationError("unknown metric '" + std::string(name) + "' (expected cosine or euclidean)");
}

namespace {

void require_same_dim(std::span<const float> u, std::span<const float> v, const char* what) {
  if (u.size() != v.size()) throw DimensionMismatch(u.size(), v.size(), what);
}

double squared_distance(std::span<const float> u, std::span<const float> v) {
  double acc = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double diff = static_cast<double>(u[i]) - static_cast<double>(v[i]);
    acc += diff * diff;
  }
  return acc;
}

// Shared by the scalar op and the matrix kernels so both produce the same bits.
double cosine_from_parts(double dot_uv, double norm_u, double norm_v) {
  return std::clamp(dot_uv / (norm_u * norm_v), -1.0, 1.0);
}

}  // namespace

double dot(std::span<const float> u, std::span<const float> v) {
  require_same_dim(u, v, "dot");
  double acc = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) acc += static_cast<double>(u[i]) * v[i];
  return acc;
}

double l2_norm(std::span<const float> u) { return std::sqrt(dot(u, u)); }

double cosine_similarity(std::span<const float> u, std::span<const float> v) {
  require_same_dim(u, v, "cosine_similarity");
  const double nu = l2_norm(u);
  const double nv = l2_norm(v);
  if (nu == 0.0 || nv == 0.0) throw ZeroNormError("cosine_similarity");
  return cosine_from_parts(dot(u, v), nu, nv);
}

double euclidean_distance(std::span<const float> u, std::span<const float> v) {
  require_same_dim(u, v, "euclidean_distance");
  return std::sqrt(squared_distance(u, v));
}

std::vector<double> row_norms(const EmbeddingMatrix& m, bool require_nonzero,
                              std::string_view what) {
  std::vector<double> norms(m.count());
  for (std::size_t i = 0; i < m.count(); ++i) {
    norms[i] = l2_norm(m.row(i));
    if (require_nonzero && norms[i] == 0.0) throw ZeroNormError(std::string(what), i);
  }
  return norms;
}

EmbeddingMatrix normalize_rows(const EmbeddingMatrix& m) {
  const auto norms = row_norms(m, true, "normalize_rows");
  EmbeddingMatrix out = m;
  for (std::size_t i = 0; i < m.count(); ++i) {
    auto r = out.row(i);
    for (auto& x : r) x = static_cast<float>(static_cast<double>(x) / norms[i]);
  }
  return out;
}

void score_row(std::span<const float> query, const EmbeddingMatrix& targets,
               std::span<const double> target_norms, Metric metric, std::span<double> out) {
  if (query.size() != targets.dim()) throw DimensionMismatch(targets.dim(), query.size(), "score_row");
  if (metric == Metric::cosine) {
    const double nq = l2_norm(query);
    if (nq == 0.0) throw ZeroNormError("score_row query");
    for (std::size_t j = 0; j < targets.count(); ++j) {
      out[j] = cosine_from_parts(dot(query, targets.row(j)), nq, target_norms[j]);
    }
  } else {
    for (std::size_t j = 0; j < targets.count(); ++j) {
      out[j] = std::sqrt(squared_distance(query, targets.row(j)));
    }
  }
}

ScoreMatrix score_matrix(const EmbeddingMatrix& queries, const EmbeddingMatrix& targets,
                         Metric metric, const ScoreOptions& options) {
  if (queries.dim() != targets.dim()) {
    throw DimensionMismatch(queries.dim(), targets.dim(), "score_matrix");
  }
  if (queries.empty() || targets.empty()) {
    throw ValidationError("score_matrix: queries and targets must be non-empty");
  }
  std::vector<double> target_norms;
  if (metric == Metric::cosine) {
    row_norms(queries, true, "score_matrix queries");
    target_norms = row_norms(targets, true, "score_matrix targets");
  }

  ScoreMatrix result;
  result.rows = queries.count();
  result.cols = targets.count();
  result.values.resize(result.rows * result.cols);

  const std::size_t block = std::max<std::size_t>(1, options.block_rows);
  const std::size_t n_blocks = (result.rows + block - 1) / block;
  parallel_for(n_blocks, options.threads, [&](std::size_t b0, std::size_t b1) {
    for (std::size_t b = b0; b < b1; ++b) {
      const std::size_t end = std::min(result.rows, (b + 1) * block);
      for (std::size_t i = b * block; i < end; ++i) {
        score_row(queries.row(i), targets, target_norms, metric,
                  std::span<double>(result.values.data() + i * result.cols, result.cols));
      }
    }
  });
  return result;
}

}  // namespace bitext
