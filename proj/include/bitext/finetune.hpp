#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "bitext/corpus_io.hpp"

namespace bitext {

enum class Activation : std::uint8_t { identity = 0, relu = 1 };

std::string_view to_string(Activation activation) noexcept;
Activation parse_activation(std::string_view name);

/// Bottleneck adapter d -> h -> d:
///
///   out = w2 * act(w1 * x + b1) + b2
///
/// w1 is h x d and w2 is d x h, both row-major. Parameters are stored as
/// `Real`; every product is accumulated in double. `Adapter<float>` is the
/// checkpointed model; `Adapter<double>` exists for exact gradient checks.
template <typename Real>
struct Adapter {
  std::size_t d = 0;
  std::size_t h = 0;
  Activation activation = Activation::relu;
  std::vector<Real> w1;
  std::vector<Real> b1;
  std::vector<Real> w2;
  std::vector<Real> b2;

  Adapter() = default;
  Adapter(std::size_t d_, std::size_t h_, Activation act)
      : d(d_), h(h_), activation(act), w1(h_ * d_), b1(h_), w2(d_ * h_), b2(d_) {}

  std::size_t parameter_count() const noexcept { return w1.size() + b1.size() + w2.size() + b2.size(); }
  bool all_finite() const noexcept;

  template <typename Other>
  Adapter<Other> cast() const {
    Adapter<Other> out(d, h, activation);
    std::copy(w1.begin(), w1.end(), out.w1.begin());
    std::copy(b1.begin(), b1.end(), out.b1.begin());
    std::copy(w2.begin(), w2.end(), out.w2.begin());
    std::copy(b2.begin(), b2.end(), out.b2.begin());
    return out;
  }
};

using AdapterModel = Adapter<float>;

/// Gradient of the pair loss, shaped like the adapter.
struct AdapterGradient {
  std::vector<double> w1, b1, w2, b2;

  AdapterGradient() = default;
  AdapterGradient(std::size_t d, std::size_t h) : w1(h * d), b1(h), w2(d * h), b2(d) {}

  void set_zero();
  void add_scaled(const AdapterGradient& other, double scale);
};

/// Glorot-uniform weights (limit sqrt(6 / (fan_in + fan_out))), zero biases.
AdapterModel init_adapter(std::size_t d, std::size_t h, Activation activation, std::uint64_t seed);

/// Hidden pre-activations and output, kept for backpropagation.
struct ForwardTrace {
  std::vector<double> pre_activation;  // h
  std::vector<double> hidden;          // h, after activation
  std::vector<double> output;          // d
};

template <typename Real>
ForwardTrace forward_trace(const Adapter<Real>& model, std::span<const Real> x);

template <typename Real>
std::vector<double> forward(const Adapter<Real>& model, std::span<const Real> x);

/// 1 - cos(forward(x), y), in [0, 2]. Throws ZeroNormError on a zero y or a
/// zero forward output.
template <typename Real>
double pair_loss(const Adapter<Real>& model, std::span<const Real> x, std::span<const Real> y);

/// d(1 - cos(out, y)) / d(out). Orthogonal to `out`.
std::vector<double> cosine_loss_output_gradient(std::span<const double> out,
                                                std::span<const double> y);

/// Analytic gradient of pair_loss w.r.t. every parameter; the ReLU derivative
/// at an exactly-zero pre-activation is 0. Returns the loss.
template <typename Real>
double accumulate_gradient(const Adapter<Real>& model, std::span<const Real> x,
                           std::span<const Real> y, AdapterGradient& grad, double scale = 1.0);

template <typename Real>
AdapterGradient gradient(const Adapter<Real>& model, std::span<const Real> x,
                         std::span<const Real> y);

enum class OptimizerKind { sgd, adam };

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t epochs = 100;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  OptimizerKind optimizer = OptimizerKind::adam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  bool shuffle_each_epoch = true;
  /// Per-sample gradients are summed in fixed chunks of this many samples and
  /// the chunk sums are reduced in chunk order, so the result does not depend
  /// on `threads`.
  std::size_t threads = 1;
};

struct TrainHistory {
  std::vector<double> epoch_mean_loss;
  double final_mean_loss = 0.0;
  double wall_seconds = 0.0;
  /// Mean pairwise cosine of adapted training rows (sampled) after training.
  double mean_pairwise_cosine = 0.0;
  /// Set when mean_pairwise_cosine > 0.99: adapted rows have collapsed.
  bool collapse_warning = false;
  /// Sample visits skipped because the adapter output was exactly zero
  /// (every ReLU unit inactive with a zero output bias).
  std::size_t degenerate_samples = 0;
};

struct TrainResult {
  AdapterModel model;
  TrainHistory history;
};

/// Mini-batch minimisation of mean pair loss over (source row i, target row i).
/// Throws DivergenceError naming the epoch and batch if a parameter becomes
/// non-finite. `targets` is never modified.
TrainResult train(AdapterModel model, const EmbeddingMatrix& sources,
                  const EmbeddingMatrix& targets, const TrainConfig& config);

/// Row-wise forward pass.
EmbeddingMatrix apply(const AdapterModel& model, const EmbeddingMatrix& m, std::size_t threads = 1);

inline constexpr char kAdp1Magic[4] = {'A', 'D', 'P', '1'};
inline constexpr std::size_t kAdp1HeaderBytes = 13;

/// ADP1: "ADP1", u32 d, u32 h, u8 activation, then w1, b1, w2, b2 as
/// little-endian float32.
void save_adapter(const AdapterModel& model, const std::filesystem::path& path);
AdapterModel load_adapter(const std::filesystem::path& path);

bool bit_equal(const AdapterModel& a, const AdapterModel& b) noexcept;

}  // namespace bitext
