#include "bitext/knn_aligner.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "bitext/errors.hpp"
#include "bitext/parallel.hpp"

namespace bitext {

namespace {

struct RankOrder {
  Metric metric;
  bool operator()(const Candidate& a, const Candidate& b) const noexcept {
    if (a.score != b.score) return better(metric, a.score, b.score);
    return a.target_index < b.target_index;
  }
};

}  // namespace

std::vector<CandidateList> top_k(const EmbeddingMatrix& queries, const EmbeddingMatrix& targets,
                                 Metric metric, std::size_t k, const SearchOptions& options) {
  if (queries.dim() != targets.dim()) throw DimensionMismatch(queries.dim(), targets.dim(), "top_k");
  if (k == 0) throw ValidationError("top_k: k must be positive");
  if (k > targets.count()) {
    throw ValidationError("top_k: k=" + std::to_string(k) + " exceeds target count " +
                          std::to_string(targets.count()));
  }
  std::vector<double> target_norms;
  if (metric == Metric::cosine) {
    row_norms(queries, true, "top_k queries");
    target_norms = row_norms(targets, true, "top_k targets");
  }

  std::vector<CandidateList> lists(queries.count());
  const RankOrder order{metric};
  parallel_for(queries.count(), options.threads, [&](std::size_t begin, std::size_t end) {
    std::vector<double> scores(targets.count());
    std::vector<Candidate> heap;
    heap.reserve(k + 1);
    for (std::size_t q = begin; q < end; ++q) {
      score_row(queries.row(q), targets, target_norms, metric, scores);
      // Max-heap under `order` keeps the worst retained candidate on top.
      heap.clear();
      for (std::size_t j = 0; j < scores.size(); ++j) {
        const Candidate c{j, scores[j]};
        if (heap.size() < k) {
          heap.push_back(c);
          std::push_heap(heap.begin(), heap.end(), order);
        } else if (order(c, heap.front())) {
          std::pop_heap(heap.begin(), heap.end(), order);
          heap.back() = c;
          std::push_heap(heap.begin(), heap.end(), order);
        }
      }
      std::sort_heap(heap.begin(), heap.end(), order);
      lists[q].query_index = q;
      lists[q].candidates.assign(heap.begin(), heap.end());
    }
  });
  return lists;
}

AlignmentResult with_threshold(const AlignmentResult& base, std::optional<double> threshold) {
  if (threshold && base.metric != Metric::cosine) {
    throw ValidationError("thresholds are only supported with the cosine metric");
  }
  AlignmentResult result;
  result.metric = base.metric;
  result.threshold = threshold;
  result.k = base.k;
  result.n_queries = base.n_queries;
  result.candidate_lists = base.candidate_lists;
  for (const auto& list : base.candidate_lists) {
    const Candidate& best = list.candidates.front();
    if (!threshold || best.score >= *threshold) {
      result.pairs.push_back({list.query_index, best.target_index, best.score});
    }
  }
  return result;
}

AlignmentResult align(const EmbeddingMatrix& queries, const EmbeddingMatrix& targets,
                      Metric metric, std::optional<double> threshold, std::size_t k,
                      const SearchOptions& options) {
  if (threshold && metric != Metric::cosine) {
    throw ValidationError("thresholds are only supported with the cosine metric");
  }
  AlignmentResult base;
  base.metric = metric;
  base.k = k;
  base.n_queries = queries.count();
  base.candidate_lists = top_k(queries, targets, metric, k, options);
  return with_threshold(base, threshold);
}

void write_alignment_tsv(const AlignmentResult& result, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  char buf[32];
  for (const auto& p : result.pairs) {
    std::snprintf(buf, sizeof buf, "%.6f", p.score);
    out << p.query_index << '\t' << p.target_index << '\t' << buf << '\n';
  }
  if (!out) throw IoError("write failure on " + path.string());
}

std::vector<AlignedPair> read_alignment_tsv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open alignment file " + path.string());
  std::vector<AlignedPair> pairs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream fields(line);
    long long q = -1;
    long long t = -1;
    AlignedPair p;
    if (!(fields >> q >> t >> p.score) || q < 0 || t < 0) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) +
                            ": expected query_index, target_index, score");
    }
    p.query_index = static_cast<std::size_t>(q);
    p.target_index = static_cast<std::size_t>(t);
    if (!pairs.empty() && pairs.back().query_index >= p.query_index) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) +
                            ": query indices must be strictly ascending");
    }
    pairs.push_back(p);
  }
  return pairs;
}

void write_candidates_tsv(const std::vector<CandidateList>& lists,
                          const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  char buf[32];
  for (const auto& list : lists) {
    for (std::size_t r = 0; r < list.candidates.size(); ++r) {
      std::snprintf(buf, sizeof buf, "%.6f", list.candidates[r].score);
      out << list.query_index << '\t' << r + 1 << '\t' << list.candidates[r].target_index << '\t'
          << buf << '\n';
    }
  }
  if (!out) throw IoError("write failure on " + path.string());
}

std::vector<CandidateList> read_candidates_tsv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open candidates file " + path.string());
  std::vector<CandidateList> lists;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream fields(line);
    long long q = -1;
    long long rank = 0;
    long long t = -1;
    double score = 0.0;
    if (!(fields >> q >> rank >> t >> score) || q < 0 || t < 0 || rank < 1) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) +
                            ": expected query_index, rank, target_index, score");
    }
    if (rank == 1) {
      if (!lists.empty() && lists.back().query_index >= static_cast<std::size_t>(q)) {
        throw ValidationError(path.string() + ":" + std::to_string(line_no) +
                              ": query indices must be strictly ascending");
      }
      lists.push_back({static_cast<std::size_t>(q), {}});
    } else if (lists.empty() || lists.back().query_index != static_cast<std::size_t>(q) ||
               lists.back().candidates.size() + 1 != static_cast<std::size_t>(rank)) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) +
                            ": ranks must be consecutive per query starting at 1");
    }
    lists.back().candidates.push_back({static_cast<std::size_t>(t), score});
  }
  return lists;
}

}  // namespace bitext
