#include "bitext/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "bitext/errors.hpp"
#include "bitext/random.hpp"

namespace bitext {

double top_k_accuracy(std::span<const CandidateList> candidates, const GoldAlignment& gold,
                      std::size_t k) {
  if (k == 0) throw ValidationError("top_k_accuracy: k must be positive");
  if (candidates.size() != gold.size()) {
    throw ValidationError("top_k_accuracy: " + std::to_string(candidates.size()) +
                          " candidate lists for " + std::to_string(gold.size()) + " gold entries");
  }
  if (candidates.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& list : candidates) {
    if (list.candidates.size() < k) {
      throw ValidationError("top_k_accuracy: k=" + std::to_string(k) + " exceeds candidate list of " +
                            std::to_string(list.candidates.size()) + " for query " +
                            std::to_string(list.query_index));
    }
    if (list.query_index >= gold.size()) {
      throw ValidationError("top_k_accuracy: query " + std::to_string(list.query_index) +
                            " has no gold target");
    }
    const std::size_t want = gold.target_of[list.query_index];
    for (std::size_t r = 0; r < k; ++r) {
      if (list.candidates[r].target_index == want) {
        ++hits;
        break;
      }
    }
  }
  return static_cast<double>(hits) / static_cast<double>(candidates.size());
}

PrecisionRecall precision_recall_f1(std::span<const AlignedPair> pairs, const GoldAlignment& gold) {
  PrecisionRecall out;
  out.aligned_count = pairs.size();
  for (const auto& p : pairs) {
    if (p.query_index >= gold.size()) {
      throw ValidationError("precision_recall_f1: query " + std::to_string(p.query_index) +
                            " has no gold target");
    }
    if (gold.target_of[p.query_index] == p.target_index) ++out.correct_count;
  }
  const double correct = static_cast<double>(out.correct_count);
  out.recall = gold.size() == 0 ? 0.0 : correct / static_cast<double>(gold.size());
  if (!pairs.empty()) {
    const double p = correct / static_cast<double>(pairs.size());
    out.precision = p;
    out.f1 = (p + out.recall) == 0.0 ? 0.0 : 2.0 * p * out.recall / (p + out.recall);
    // Equal counts make p and r the same quotient; keep them bit-identical in f1 too.
    if (p == out.recall) out.f1 = p;
  }
  return out;
}

PrecisionRecall precision_recall_f1(const AlignmentResult& alignment, const GoldAlignment& gold) {
  return precision_recall_f1(std::span<const AlignedPair>(alignment.pairs), gold);
}

std::vector<AlignedPair> filter_pairs(std::span<const AlignedPair> pairs,
                                      std::optional<double> threshold) {
  std::vector<AlignedPair> kept;
  kept.reserve(pairs.size());
  for (const auto& p : pairs) {
    if (!threshold || p.score >= *threshold) kept.push_back(p);
  }
  return kept;
}

std::vector<std::optional<double>> default_threshold_grid() {
  std::vector<std::optional<double>> grid{std::nullopt};
  for (int i = 0; i <= 19; ++i) grid.emplace_back(i / 20.0);
  return grid;
}

std::vector<ThresholdRow> threshold_curve(std::span<const AlignedPair> unfiltered_pairs,
                                          const GoldAlignment& gold,
                                          std::span<const std::optional<double>> grid) {
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (i > 0 && !grid[i]) throw ValidationError("threshold grid: the unset entry must come first");
    if (i > 0 && grid[i - 1] && *grid[i - 1] >= *grid[i]) {
      throw ValidationError("threshold grid must be strictly ascending");
    }
  }
  std::vector<ThresholdRow> rows;
  rows.reserve(grid.size());
  for (const auto& t : grid) {
    const auto kept = filter_pairs(unfiltered_pairs, t);
    rows.push_back({t, precision_recall_f1(kept, gold)});
  }
  return rows;
}

EvalReport evaluate(const AlignmentResult& unfiltered, const GoldAlignment& gold,
                    std::span<const std::size_t> ks,
                    std::span<const std::optional<double>> grid) {
  EvalReport report;
  report.n_queries = unfiltered.n_queries;
  for (std::size_t k : ks) {
    report.top_k_accuracy[k] = top_k_accuracy(unfiltered.candidate_lists, gold, k);
  }
  if (unfiltered.metric == Metric::cosine) {
    report.threshold_rows = threshold_curve(unfiltered.pairs, gold, grid);
  } else {
    const std::optional<double> none;
    report.threshold_rows = threshold_curve(unfiltered.pairs, gold, std::span(&none, 1));
  }
  return report;
}

std::vector<std::size_t> FoldPlan::training_indices(std::size_t f) const {
  std::vector<std::size_t> train;
  train.reserve(n - folds.at(f).size());
  for (std::size_t g = 0; g < folds.size(); ++g) {
    if (g == f) continue;
    train.insert(train.end(), folds[g].begin(), folds[g].end());
  }
  return train;
}

FoldPlan make_folds(std::size_t n, std::size_t k_folds, std::uint64_t seed) {
  if (k_folds < 2 || k_folds > n) {
    throw ValidationError("make_folds: need 2 <= k_folds <= n (k_folds=" + std::to_string(k_folds) +
                          ", n=" + std::to_string(n) + ")");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(seed, {0x666f6c6473ull}));
  shuffle(order, rng);

  FoldPlan plan{n, k_folds, seed, {}};
  plan.folds.resize(k_folds);
  const std::size_t base = n / k_folds;
  const std::size_t extra = n % k_folds;
  std::size_t pos = 0;
  for (std::size_t f = 0; f < k_folds; ++f) {
    const std::size_t size = base + (f < extra ? 1 : 0);
    plan.folds[f].assign(order.begin() + static_cast<std::ptrdiff_t>(pos),
                         order.begin() + static_cast<std::ptrdiff_t>(pos + size));
    pos += size;
  }
  return plan;
}

std::size_t prefix_length(std::size_t n, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw ValidationError("training fraction must be in (0, 1], got " + std::to_string(fraction));
  }
  const double product = fraction * static_cast<double>(n);
  const double nearest = std::round(product);
  if (std::abs(product - nearest) <= 1e-9 * std::max(1.0, product)) {
    return static_cast<std::size_t>(nearest);
  }
  return static_cast<std::size_t>(std::ceil(product));
}

std::vector<std::size_t> training_prefix(std::span<const std::size_t> train_indices,
                                         double fraction) {
  if (train_indices.empty()) throw ValidationError("training_prefix: empty training set");
  const std::size_t len = prefix_length(train_indices.size(), fraction);
  return {train_indices.begin(), train_indices.begin() + static_cast<std::ptrdiff_t>(len)};
}

MeanStd mean_std(std::span<const double> values) {
  MeanStd out;
  out.n = values.size();
  if (values.empty()) return out;
  double sum = 0.0;
  for (double v : values) sum += v;
  out.mean = sum / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.stddev = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return out;
}

}  // namespace bitext
