#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <vector>

#include "bitext/corpus_io.hpp"
#include "bitext/embedding_core.hpp"

namespace bitext {

struct Candidate {
  std::size_t target_index = 0;
  double score = 0.0;

  friend bool operator==(const Candidate&, const Candidate&) = default;
};

/// Best-first candidates of one query; ties broken by ascending target index.
struct CandidateList {
  std::size_t query_index = 0;
  std::vector<Candidate> candidates;
};

struct AlignedPair {
  std::size_t query_index = 0;
  std::size_t target_index = 0;
  double score = 0.0;

  friend bool operator==(const AlignedPair&, const AlignedPair&) = default;
};

struct AlignmentResult {
  /// At most one pair per query, ascending query index.
  std::vector<AlignedPair> pairs;
  Metric metric = Metric::cosine;
  /// Unset means every query is paired.
  std::optional<double> threshold;
  std::size_t k = 1;
  std::vector<CandidateList> candidate_lists;
  std::size_t n_queries = 0;
};

struct SearchOptions {
  std::size_t threads = 1;
};

/// Exhaustive k-best search for every query.
std::vector<CandidateList> top_k(const EmbeddingMatrix& queries, const EmbeddingMatrix& targets,
                                 Metric metric, std::size_t k, const SearchOptions& options = {});

/// Top-1 alignment, optionally filtered by a cosine threshold (score >= t).
/// Keeps `k` candidates per query in the result for Top-k evaluation.
AlignmentResult align(const EmbeddingMatrix& queries, const EmbeddingMatrix& targets,
                      Metric metric, std::optional<double> threshold = std::nullopt,
                      std::size_t k = 1, const SearchOptions& options = {});

/// Re-filters an existing alignment's Top-1 candidates at a new threshold.
AlignmentResult with_threshold(const AlignmentResult& base, std::optional<double> threshold);

/// Cosine scores at or below this value are indistinguishable from "no
/// threshold"; the CLI maps it to an absent threshold.
inline constexpr double kNoThresholdSentinel = -0.2;

/// TSV: query_index, target_index, score (6 decimals), no header.
void write_alignment_tsv(const AlignmentResult& result, const std::filesystem::path& path);
std::vector<AlignedPair> read_alignment_tsv(const std::filesystem::path& path);

/// TSV: query_index, rank, target_index, score (rank starts at 1), no header.
void write_candidates_tsv(const std::vector<CandidateList>& lists,
                          const std::filesystem::path& path);
std::vector<CandidateList> read_candidates_tsv(const std::filesystem::path& path);

}  // namespace bitext
