#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "bitext/errors.hpp"
#include "bitext/eval.hpp"
#include "oracles.hpp"

using namespace bitext;

namespace {

std::vector<CandidateList> lists_from(const std::vector<std::vector<std::size_t>>& ranked) {
  std::vector<CandidateList> out;
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    CandidateList l{i, {}};
    double score = 1.0;
    for (std::size_t t : ranked[i]) l.candidates.push_back({t, score -= 0.1});
    out.push_back(std::move(l));
  }
  return out;
}

}  // namespace

TEST_CASE("top-k accuracy") {
  const auto gold = GoldAlignment::identity(4);
  SUBCASE("perfect") {
    const auto lists = lists_from({{0, 1}, {1, 0}, {2, 3}, {3, 2}});
    CHECK(top_k_accuracy(lists, gold, 1) == 1.0);
  }
  SUBCASE("total miss") {
    const auto lists = lists_from({{1, 2}, {0, 2}, {3, 1}, {2, 1}});
    CHECK(top_k_accuracy(lists, gold, 1) == 0.0);
    CHECK(top_k_accuracy(lists, gold, 2) == 0.0);
  }
  SUBCASE("gold at rank two counts only for k >= 2") {
    const auto lists = lists_from({{0, 1, 2}, {0, 1, 2}, {0, 1, 2}, {3, 0, 1}});
    CHECK(top_k_accuracy(lists, gold, 1) == 0.5);
    CHECK(top_k_accuracy(lists, gold, 2) == 0.75);
    CHECK(top_k_accuracy(lists, gold, 3) == 1.0);
  }
  SUBCASE("k beyond the list is an error") {
    const auto lists = lists_from({{0}, {1}, {2}, {3}});
    CHECK_THROWS_AS(top_k_accuracy(lists, gold, 2), ValidationError);
  }
}

TEST_CASE("precision, recall and F1 from counts") {
  const auto gold = GoldAlignment::identity(4);
  SUBCASE("two aligned, both correct") {
    const std::vector<AlignedPair> pairs{{0, 0, 0.9}, {1, 1, 0.8}};
    const auto pr = precision_recall_f1(pairs, gold);
    REQUIRE(pr.precision.has_value());
    CHECK(*pr.precision == 1.0);
    CHECK(pr.recall == 0.5);
    CHECK(pr.f1 == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    CHECK(pr.aligned_count == 2);
    CHECK(pr.correct_count == 2);
  }
  SUBCASE("empty alignment") {
    const auto pr = precision_recall_f1(std::vector<AlignedPair>{}, gold);
    CHECK_FALSE(pr.precision.has_value());
    CHECK(pr.recall == 0.0);
    CHECK(pr.f1 == 0.0);
  }
  SUBCASE("aligned but all wrong") {
    const std::vector<AlignedPair> pairs{{0, 1, 0.9}};
    const auto pr = precision_recall_f1(pairs, gold);
    CHECK(*pr.precision == 0.0);
    CHECK(pr.f1 == 0.0);
  }
}

TEST_CASE("every query aligned: precision, recall, F1 and Top-1 coincide exactly") {
  std::mt19937_64 rng(31);
  const auto q = oracle::random_matrix(80, 6, rng);
  const auto t = oracle::random_matrix(80, 6, rng);
  const auto gold = GoldAlignment::identity(80);
  const auto r = align(q, t, Metric::cosine);
  const auto pr = precision_recall_f1(r, gold);
  const double top1 = top_k_accuracy(r.candidate_lists, gold, 1);
  CHECK(*pr.precision == top1);
  CHECK(pr.recall == top1);
  CHECK(pr.f1 == top1);
}

TEST_CASE("threshold curve") {
  std::mt19937_64 rng(37);
  const auto q = oracle::random_matrix(300, 4, rng);
  auto t = q;
  // Perturb targets so some best matches are wrong.
  std::normal_distribution<float> noise(0.0f, 0.6f);
  for (auto& x : t.data()) x += noise(rng);
  const auto gold = GoldAlignment::identity(300);
  const auto r = align(q, t, Metric::cosine);
  const auto grid = default_threshold_grid();
  REQUIRE(grid.size() == 21);
  CHECK_FALSE(grid[0].has_value());
  CHECK(*grid[1] == 0.0);
  CHECK(*grid[20] == doctest::Approx(0.95));
  const auto rows = threshold_curve(r.pairs, gold, grid);
  REQUIRE(rows.size() == grid.size());
  CHECK(rows[0].scores.aligned_count == 300);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    CHECK(rows[i].scores.aligned_count <= rows[i - 1].scores.aligned_count);
    CHECK(rows[i].scores.recall <= rows[i - 1].scores.recall);
    CHECK(rows[i].scores.correct_count <= rows[i].scores.aligned_count);
  }
  const std::vector<std::optional<double>> unsorted{0.5, 0.2};
  CHECK_THROWS_AS(threshold_curve(r.pairs, gold, unsorted), ValidationError);
  const std::vector<std::optional<double>> late_none{0.2, std::nullopt};
  CHECK_THROWS_AS(threshold_curve(r.pairs, gold, late_none), ValidationError);
}

TEST_CASE("evaluate gives only the unthresholded row for euclidean") {
  std::mt19937_64 rng(41);
  const auto q = oracle::random_matrix(20, 4, rng);
  const auto r = align(q, q, Metric::euclidean, std::nullopt, 3);
  const std::vector<std::size_t> ks{1, 3};
  const auto grid = default_threshold_grid();
  const auto report = evaluate(r, GoldAlignment::identity(20), ks, grid);
  CHECK(report.top_k_accuracy.at(1) == 1.0);
  CHECK(report.top_k_accuracy.at(3) == 1.0);
  REQUIRE(report.threshold_rows.size() == 1);
  CHECK_FALSE(report.threshold_rows[0].threshold.has_value());
}

TEST_CASE("make_folds") {
  SUBCASE("7952 pairs into five folds") {
    const auto plan = make_folds(7952, 5, 42);
    std::vector<std::size_t> sizes;
    for (const auto& f : plan.folds) sizes.push_back(f.size());
    CHECK(sizes == std::vector<std::size_t>{1591, 1591, 1590, 1590, 1590});
    std::vector<std::size_t> all;
    for (const auto& f : plan.folds) all.insert(all.end(), f.begin(), f.end());
    std::sort(all.begin(), all.end());
    std::vector<std::size_t> expected(7952);
    std::iota(expected.begin(), expected.end(), 0);
    CHECK(all == expected);
    CHECK(plan.training_indices(0).size() == 6361);
    CHECK(plan.training_indices(4).size() == 6362);
  }
  SUBCASE("n = 10, k = 5") {
    const auto plan = make_folds(10, 5, 1);
    for (const auto& f : plan.folds) CHECK(f.size() == 2);
  }
  SUBCASE("same seed gives the same folds, another seed differs") {
    CHECK(make_folds(500, 5, 9).folds == make_folds(500, 5, 9).folds);
    CHECK(make_folds(500, 5, 9).folds != make_folds(500, 5, 10).folds);
  }
  SUBCASE("training indices exclude the test fold") {
    const auto plan = make_folds(103, 4, 3);
    for (std::size_t f = 0; f < 4; ++f) {
      const auto train = plan.training_indices(f);
      const std::set<std::size_t> test(plan.folds[f].begin(), plan.folds[f].end());
      CHECK(train.size() + test.size() == 103);
      for (auto i : train) CHECK(test.count(i) == 0);
    }
  }
  SUBCASE("invalid fold counts") {
    CHECK_THROWS_AS(make_folds(10, 1, 0), ValidationError);
    CHECK_THROWS_AS(make_folds(3, 5, 0), ValidationError);
  }
}

TEST_CASE("training prefixes") {
  std::vector<std::size_t> train(6361);
  std::iota(train.begin(), train.end(), 100);
  CHECK(training_prefix(train, 0.1).size() == 637);
  CHECK(training_prefix(train, 1.0).size() == 6361);
  CHECK(prefix_length(10, 0.3) == 3);
  CHECK(prefix_length(10, 0.7) == 7);
  CHECK(prefix_length(7, 0.5) == 4);
  std::vector<std::size_t> previous;
  for (int i = 1; i <= 10; ++i) {
    const auto p = training_prefix(train, i / 10.0);
    CHECK(std::equal(previous.begin(), previous.end(), p.begin()));
    previous = p;
  }
  CHECK_THROWS_AS(training_prefix(train, 0.0), ValidationError);
  CHECK_THROWS_AS(training_prefix(train, 1.5), ValidationError);
}

TEST_CASE("mean and sample standard deviation") {
  const std::vector<double> xs{2, 4, 4, 4, 5, 5, 7, 9};
  const auto ms = mean_std(xs);
  CHECK(ms.mean == 5.0);
  CHECK(ms.stddev == doctest::Approx(std::sqrt(32.0 / 7.0)).epsilon(1e-14));
  CHECK(ms.n == 8);
  const std::vector<double> one{3.5};
  CHECK(mean_std(one).stddev == 0.0);
}
