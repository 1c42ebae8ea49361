#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>

#include "bitext/corpus_io.hpp"

namespace bitext {

/// Parallel embedding pairs with a known, learnable distortion between the
/// two sides. Used for end-to-end checks when real encoder output is not
/// available.
///
///   target_i = random unit vector in R^d
///   source_i = target_i + strength * W2 tanh(gain * W1 target_i) + noise * N(0, I/d)
///
/// W1, W2 are fixed d x d Gaussian matrices scaled by 1/sqrt(d).
struct SyntheticConfig {
  std::size_t count = 2000;
  std::size_t dim = 64;
  std::uint64_t seed = 1;
  double strength = 1.0;
  double gain = 2.0;
  /// When unset, the noise level is found by bisection so that raw Top-1
  /// cosine accuracy (targets as queries) lands near `target_raw_top1`.
  std::optional<double> noise;
  double target_raw_top1 = 0.15;
};

struct SyntheticTask {
  EmbeddingMatrix sources;
  EmbeddingMatrix targets;
  double noise = 0.0;
  /// Top-1 cosine accuracy of targets (queries) against raw sources.
  double raw_top1 = 0.0;
};

SyntheticTask make_synthetic_task(const SyntheticConfig& config);

}  // namespace bitext
