#include "bitext/synthetic.hpp"

#include <cmath>
#include <vector>

#include "bitext/errors.hpp"
#include "bitext/eval.hpp"
#include "bitext/knn_aligner.hpp"
#include "bitext/random.hpp"

namespace bitext {

namespace {

std::vector<double> gaussian_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
  std::vector<double> m(rows * cols);
  const double scale = 1.0 / std::sqrt(static_cast<double>(cols));
  for (auto& v : m) v = normal01(rng) * scale;
  return m;
}

double raw_top1(const EmbeddingMatrix& targets, const EmbeddingMatrix& sources) {
  const auto lists = top_k(targets, sources, Metric::cosine, 1);
  return top_k_accuracy(lists, GoldAlignment::identity(targets.count()), 1);
}

}  // namespace

SyntheticTask make_synthetic_task(const SyntheticConfig& config) {
  const std::size_t n = config.count;
  const std::size_t d = config.dim;
  if (n == 0 || d == 0) throw ValidationError("synthetic task: count and dim must be positive");

  Rng rng(derive_seed(config.seed, {0x73796e7468ull}));
  std::vector<float> y(n * d);
  for (std::size_t i = 0; i < n; ++i) {
    double ss = 0.0;
    std::vector<double> v(d);
    for (auto& x : v) {
      x = normal01(rng);
      ss += x * x;
    }
    const double inv = 1.0 / std::sqrt(ss);
    for (std::size_t j = 0; j < d; ++j) y[i * d + j] = static_cast<float>(v[j] * inv);
  }

  const auto w1 = gaussian_matrix(d, d, rng);
  const auto w2 = gaussian_matrix(d, d, rng);
  std::vector<double> distorted(n * d);
  std::vector<double> hidden(d);
  for (std::size_t i = 0; i < n; ++i) {
    const float* yi = y.data() + i * d;
    for (std::size_t r = 0; r < d; ++r) {
      double acc = 0.0;
      for (std::size_t c = 0; c < d; ++c) acc += w1[r * d + c] * yi[c];
      hidden[r] = std::tanh(config.gain * acc);
    }
    for (std::size_t r = 0; r < d; ++r) {
      double acc = 0.0;
      for (std::size_t c = 0; c < d; ++c) acc += w2[r * d + c] * hidden[c];
      distorted[i * d + r] = yi[r] + config.strength * acc;
    }
  }
  // One fixed noise direction per coordinate, scaled by the chosen level.
  std::vector<double> noise_dir(n * d);
  const double per_coord = 1.0 / std::sqrt(static_cast<double>(d));
  for (auto& v : noise_dir) v = normal01(rng) * per_coord;

  SyntheticTask task;
  task.targets = EmbeddingMatrix(d, n, std::move(y));

  auto build = [&](double noise) {
    std::vector<float> x(n * d);
    for (std::size_t k = 0; k < x.size(); ++k) {
      x[k] = static_cast<float>(distorted[k] + noise * noise_dir[k]);
    }
    return EmbeddingMatrix(d, n, std::move(x));
  };

  if (config.noise) {
    task.noise = *config.noise;
    task.sources = build(task.noise);
    task.raw_top1 = raw_top1(task.targets, task.sources);
    return task;
  }

  // Accuracy falls as noise grows; bisect on the noise level.
  double lo = 0.0;
  double hi = 4.0;
  for (int iter = 0; iter < 12; ++iter) {
    const double mid = 0.5 * (lo + hi);
    const double acc = raw_top1(task.targets, build(mid));
    if (acc > config.target_raw_top1) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  task.noise = 0.5 * (lo + hi);
  task.sources = build(task.noise);
  task.raw_top1 = raw_top1(task.targets, task.sources);
  return task;
}

}  // namespace bitext
