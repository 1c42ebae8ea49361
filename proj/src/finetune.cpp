#include "bitext/finetune.hpp"

#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <string>

#include "binary_io.hpp"
#include "bitext/embedding_core.hpp"
#include "bitext/errors.hpp"
#include "bitext/parallel.hpp"
#include "bitext/random.hpp"

namespace bitext {

std::string_view to_string(Activation activation) noexcept {
  return activation == Activation::relu ? "relu" : "identity";
}

Activation parse_activation(std::string_view name) {
  if (name == "relu") return Activation::relu;
  if (name == "identity" || name == "linear") return Activation::identity;
  throw ValidationError("unknown activation '" + std::string(name) + "' (expected relu or identity)");
}

namespace {

template <typename Vec>
bool finite_all(const Vec& v) {
  for (auto x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

double norm(std::span<const double> v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return std::sqrt(acc);
}

double dot_d(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

template <typename Real>
void check_input(const Adapter<Real>& model, std::size_t size, const char* what) {
  if (size != model.d) throw DimensionMismatch(model.d, size, what);
}

}  // namespace

template <typename Real>
bool Adapter<Real>::all_finite() const noexcept {
  return finite_all(w1) && finite_all(b1) && finite_all(w2) && finite_all(b2);
}

void AdapterGradient::set_zero() {
  std::fill(w1.begin(), w1.end(), 0.0);
  std::fill(b1.begin(), b1.end(), 0.0);
  std::fill(w2.begin(), w2.end(), 0.0);
  std::fill(b2.begin(), b2.end(), 0.0);
}

void AdapterGradient::add_scaled(const AdapterGradient& other, double scale) {
  auto axpy = [scale](std::vector<double>& dst, const std::vector<double>& src) {
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += scale * src[i];
  };
  axpy(w1, other.w1);
  axpy(b1, other.b1);
  axpy(w2, other.w2);
  axpy(b2, other.b2);
}

AdapterModel init_adapter(std::size_t d, std::size_t h, Activation activation, std::uint64_t seed) {
  if (d == 0 || h == 0) throw ValidationError("init_adapter: d and h must be positive");
  AdapterModel model(d, h, activation);
  Rng rng(derive_seed(seed, {0x696e6974ull}));
  const double limit1 = std::sqrt(6.0 / static_cast<double>(d + h));
  const double limit2 = std::sqrt(6.0 / static_cast<double>(h + d));
  for (auto& w : model.w1) w = static_cast<float>(uniform(rng, -limit1, limit1));
  for (auto& w : model.w2) w = static_cast<float>(uniform(rng, -limit2, limit2));
  return model;
}

template <typename Real>
ForwardTrace forward_trace(const Adapter<Real>& model, std::span<const Real> x) {
  check_input(model, x.size(), "adapter forward");
  const std::size_t d = model.d;
  const std::size_t h = model.h;
  ForwardTrace t;
  t.pre_activation.resize(h);
  t.hidden.resize(h);
  t.output.resize(d);
  for (std::size_t j = 0; j < h; ++j) {
    const Real* w = model.w1.data() + j * d;
    double acc = model.b1[j];
    for (std::size_t i = 0; i < d; ++i) acc += static_cast<double>(w[i]) * x[i];
    t.pre_activation[j] = acc;
    t.hidden[j] = (model.activation == Activation::relu && acc <= 0.0) ? 0.0 : acc;
  }
  for (std::size_t i = 0; i < d; ++i) {
    const Real* w = model.w2.data() + i * h;
    double acc = model.b2[i];
    for (std::size_t j = 0; j < h; ++j) acc += static_cast<double>(w[j]) * t.hidden[j];
    t.output[i] = acc;
  }
  return t;
}

template <typename Real>
std::vector<double> forward(const Adapter<Real>& model, std::span<const Real> x) {
  return forward_trace(model, x).output;
}

std::vector<double> cosine_loss_output_gradient(std::span<const double> out,
                                                std::span<const double> y) {
  // L = 1 - <o,y>/(|o||y|);  dL/do = -(y/|y| - cos * o/|o|) / |o|
  const double no = norm(out);
  const double ny = norm(y);
  if (no == 0.0) throw ZeroNormError("pair loss: adapter output");
  if (ny == 0.0) throw ZeroNormError("pair loss: target");
  const double cos = dot_d(out, y) / (no * ny);
  std::vector<double> g(out.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    g[i] = -(y[i] / ny - cos * out[i] / no) / no;
  }
  return g;
}

namespace {

template <typename Real>
std::vector<double> widen(std::span<const Real> v) {
  return {v.begin(), v.end()};
}

double loss_from(std::span<const double> out, std::span<const double> y) {
  const double no = norm(out);
  const double ny = norm(y);
  if (no == 0.0) throw ZeroNormError("pair loss: adapter output");
  if (ny == 0.0) throw ZeroNormError("pair loss: target");
  const double cos = std::clamp(dot_d(out, y) / (no * ny), -1.0, 1.0);
  return 1.0 - cos;
}

}  // namespace

template <typename Real>
double pair_loss(const Adapter<Real>& model, std::span<const Real> x, std::span<const Real> y) {
  check_input(model, y.size(), "pair loss target");
  const auto out = forward(model, x);
  return loss_from(out, widen(y));
}

template <typename Real>
double accumulate_gradient(const Adapter<Real>& model, std::span<const Real> x,
                           std::span<const Real> y, AdapterGradient& grad, double scale) {
  check_input(model, y.size(), "pair loss target");
  const std::size_t d = model.d;
  const std::size_t h = model.h;
  const auto trace = forward_trace(model, x);
  const auto yd = widen(y);
  const double loss = loss_from(trace.output, yd);
  const auto g_out = cosine_loss_output_gradient(trace.output, yd);

  // Output layer.
  std::vector<double> g_hidden(h, 0.0);
  for (std::size_t i = 0; i < d; ++i) {
    const double gi = g_out[i];
    grad.b2[i] += scale * gi;
    double* gw = grad.w2.data() + i * h;
    const Real* w = model.w2.data() + i * h;
    for (std::size_t j = 0; j < h; ++j) {
      gw[j] += scale * gi * trace.hidden[j];
      g_hidden[j] += gi * static_cast<double>(w[j]);
    }
  }
  // Hidden layer.
  for (std::size_t j = 0; j < h; ++j) {
    double gz = g_hidden[j];
    if (model.activation == Activation::relu && trace.pre_activation[j] <= 0.0) gz = 0.0;
    if (gz == 0.0) continue;
    grad.b1[j] += scale * gz;
    double* gw = grad.w1.data() + j * d;
    for (std::size_t i = 0; i < d; ++i) gw[i] += scale * gz * static_cast<double>(x[i]);
  }
  return loss;
}

template <typename Real>
AdapterGradient gradient(const Adapter<Real>& model, std::span<const Real> x,
                         std::span<const Real> y) {
  AdapterGradient grad(model.d, model.h);
  accumulate_gradient(model, x, y, grad);
  return grad;
}

template struct Adapter<float>;
template struct Adapter<double>;
template ForwardTrace forward_trace(const Adapter<float>&, std::span<const float>);
template ForwardTrace forward_trace(const Adapter<double>&, std::span<const double>);
template std::vector<double> forward(const Adapter<float>&, std::span<const float>);
template std::vector<double> forward(const Adapter<double>&, std::span<const double>);
template double pair_loss(const Adapter<float>&, std::span<const float>, std::span<const float>);
template double pair_loss(const Adapter<double>&, std::span<const double>, std::span<const double>);
template double accumulate_gradient(const Adapter<float>&, std::span<const float>,
                                    std::span<const float>, AdapterGradient&, double);
template double accumulate_gradient(const Adapter<double>&, std::span<const double>,
                                    std::span<const double>, AdapterGradient&, double);
template AdapterGradient gradient(const Adapter<float>&, std::span<const float>,
                                  std::span<const float>);
template AdapterGradient gradient(const Adapter<double>&, std::span<const double>,
                                  std::span<const double>);

namespace {

constexpr std::size_t kGradientChunk = 8;

class Optimizer {
 public:
  Optimizer(const TrainConfig& config, std::size_t d, std::size_t h) : config_(config) {
    if (config.optimizer == OptimizerKind::adam) {
      m_ = AdapterGradient(d, h);
      v_ = AdapterGradient(d, h);
    }
  }

  void step(AdapterModel& model, const AdapterGradient& grad) {
    ++t_;
    update(model.w1, grad.w1, m_.w1, v_.w1);
    update(model.b1, grad.b1, m_.b1, v_.b1);
    update(model.w2, grad.w2, m_.w2, v_.w2);
    update(model.b2, grad.b2, m_.b2, v_.b2);
  }

 private:
  void update(std::vector<float>& params, const std::vector<double>& g, std::vector<double>& m,
              std::vector<double>& v) const {
    const double lr = config_.learning_rate;
    if (config_.optimizer == OptimizerKind::sgd) {
      for (std::size_t i = 0; i < params.size(); ++i) {
        params[i] = static_cast<float>(params[i] - lr * g[i]);
      }
      return;
    }
    const double b1 = config_.beta1;
    const double b2 = config_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      m[i] = b1 * m[i] + (1.0 - b1) * g[i];
      v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
      const double step = lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + config_.epsilon);
      params[i] = static_cast<float>(params[i] - step);
    }
  }

  TrainConfig config_;
  AdapterGradient m_, v_;
  std::uint64_t t_ = 0;
};

void validate(const TrainConfig& c) {
  if (!(c.learning_rate > 0.0) || !std::isfinite(c.learning_rate)) {
    throw ValidationError("learning_rate must be positive");
  }
  if (c.epochs == 0) throw ValidationError("epochs must be positive");
  if (c.batch_size == 0) throw ValidationError("batch_size must be positive");
  if (c.optimizer == OptimizerKind::adam &&
      !(c.beta1 >= 0.0 && c.beta1 < 1.0 && c.beta2 >= 0.0 && c.beta2 < 1.0 && c.epsilon > 0.0)) {
    throw ValidationError("adam requires 0 <= beta1, beta2 < 1 and epsilon > 0");
  }
}

double mean_pairwise_cosine(const AdapterModel& model, const EmbeddingMatrix& sources) {
  constexpr std::size_t kSample = 64;
  const std::size_t n = sources.count();
  const std::size_t m = std::min(n, kSample);
  if (m < 2) return 0.0;
  std::vector<std::vector<double>> rows;
  rows.reserve(m);
  for (std::size_t s = 0; s < m; ++s) rows.push_back(forward(model, sources.row(s * n / m)));
  double total = 0.0;
  std::size_t pairs = 0;
  for (std::size_t a = 0; a < m; ++a) {
    const double na = norm(rows[a]);
    for (std::size_t b = a + 1; b < m; ++b) {
      const double nb = norm(rows[b]);
      if (na == 0.0 || nb == 0.0) continue;
      total += dot_d(rows[a], rows[b]) / (na * nb);
      ++pairs;
    }
  }
  return pairs == 0 ? 0.0 : total / static_cast<double>(pairs);
}

}  // namespace

TrainResult train(AdapterModel model, const EmbeddingMatrix& sources,
                  const EmbeddingMatrix& targets, const TrainConfig& config) {
  validate(config);
  check_counts(sources.count(), targets.count(), "train");
  if (sources.count() == 0) throw ValidationError("train: no training pairs");
  if (sources.dim() != model.d) throw DimensionMismatch(model.d, sources.dim(), "train sources");
  if (targets.dim() != model.d) throw DimensionMismatch(model.d, targets.dim(), "train targets");
  if (!model.all_finite()) throw ValidationError("train: initial model has non-finite parameters");

  const auto started = std::chrono::steady_clock::now();
  const std::size_t n = sources.count();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(config.seed, {0x747261696eull}));

  Optimizer optimizer(config, model.d, model.h);
  const std::size_t max_chunks = (std::min(config.batch_size, n) + kGradientChunk - 1) / kGradientChunk;
  std::vector<AdapterGradient> partials(max_chunks, AdapterGradient(model.d, model.h));
  std::vector<double> chunk_loss(max_chunks);
  std::vector<std::size_t> chunk_degenerate(max_chunks);
  AdapterGradient batch_grad(model.d, model.h);

  TrainResult result;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    if (config.shuffle_each_epoch) shuffle(order, rng);
    double epoch_loss = 0.0;
    std::size_t batch_no = 0;
    for (std::size_t start = 0; start < n; start += config.batch_size, ++batch_no) {
      const std::size_t end = std::min(n, start + config.batch_size);
      const std::size_t chunks = (end - start + kGradientChunk - 1) / kGradientChunk;
      parallel_for(chunks, config.threads, [&](std::size_t c0, std::size_t c1) {
        for (std::size_t c = c0; c < c1; ++c) {
          partials[c].set_zero();
          chunk_loss[c] = 0.0;
          chunk_degenerate[c] = 0;
          const std::size_t s1 = std::min(end, start + (c + 1) * kGradientChunk);
          for (std::size_t s = start + c * kGradientChunk; s < s1; ++s) {
            try {
              chunk_loss[c] += accumulate_gradient(model, sources.row(order[s]),
                                                   targets.row(order[s]), partials[c]);
            } catch (const ZeroNormError&) {
              // All hidden units inactive and b2 == 0: no usable gradient from
              // this pair. Its cosine counts as 0.
              chunk_loss[c] += 1.0;
              ++chunk_degenerate[c];
            }
          }
        }
      });
      batch_grad.set_zero();
      const double inv = 1.0 / static_cast<double>(end - start);
      for (std::size_t c = 0; c < chunks; ++c) {
        batch_grad.add_scaled(partials[c], inv);
        epoch_loss += chunk_loss[c];
        result.history.degenerate_samples += chunk_degenerate[c];
      }
      optimizer.step(model, batch_grad);
      if (!model.all_finite()) throw DivergenceError(epoch + 1, batch_no + 1);
    }
    result.history.epoch_mean_loss.push_back(epoch_loss / static_cast<double>(n));
  }

  double final_loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    try {
      final_loss += pair_loss(model, sources.row(i), targets.row(i));
    } catch (const ZeroNormError&) {
      final_loss += 1.0;
    }
  }
  result.history.final_mean_loss = final_loss / static_cast<double>(n);
  result.history.mean_pairwise_cosine = mean_pairwise_cosine(model, sources);
  result.history.collapse_warning = result.history.mean_pairwise_cosine > 0.99;
  result.history.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  result.model = std::move(model);
  return result;
}

EmbeddingMatrix apply(const AdapterModel& model, const EmbeddingMatrix& m, std::size_t threads) {
  if (m.dim() != model.d) throw DimensionMismatch(model.d, m.dim(), "apply");
  EmbeddingMatrix out(m.dim(), m.count());
  parallel_for(m.count(), threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t r = begin; r < end; ++r) {
      const auto y = forward(model, m.row(r));
      auto dst = out.row(r);
      for (std::size_t i = 0; i < y.size(); ++i) dst[i] = static_cast<float>(y[i]);
    }
  });
  for (float v : out.data()) {
    if (!std::isfinite(v)) throw ValidationError("apply: adapter produced a non-finite value");
  }
  return out;
}

void save_adapter(const AdapterModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(kAdp1Magic, 4);
  detail::write_le(out, static_cast<std::uint32_t>(model.d));
  detail::write_le(out, static_cast<std::uint32_t>(model.h));
  detail::write_le(out, static_cast<std::uint8_t>(model.activation));
  detail::write_floats_le(out, model.w1);
  detail::write_floats_le(out, model.b1);
  detail::write_floats_le(out, model.w2);
  detail::write_floats_le(out, model.b2);
  out.flush();
  if (!out) throw IoError("write failure on " + path.string());
}

AdapterModel load_adapter(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open adapter checkpoint " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (in.gcount() != 4 || std::memcmp(magic, kAdp1Magic, 4) != 0) {
    throw ValidationError(path.string() + ": bad magic (expected ADP1)");
  }
  std::uint32_t d = 0;
  std::uint32_t h = 0;
  std::uint8_t act = 0;
  if (!detail::read_le(in, d) || !detail::read_le(in, h) || !detail::read_le(in, act)) {
    throw ValidationError(path.string() + ": truncated ADP1 header");
  }
  if (d == 0 || h == 0) throw ValidationError(path.string() + ": ADP1 header has zero d or h");
  if (act > static_cast<std::uint8_t>(Activation::relu)) {
    throw ValidationError(path.string() + ": unknown activation code " + std::to_string(act));
  }
  AdapterModel model(d, h, static_cast<Activation>(act));
  for (auto* block : {&model.w1, &model.b1, &model.w2, &model.b2}) {
    if (detail::read_floats_le(in, *block) != block->size()) {
      throw ValidationError(path.string() + ": truncated ADP1 payload");
    }
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw ValidationError(path.string() + ": trailing bytes after ADP1 payload");
  }
  if (!model.all_finite()) throw ValidationError(path.string() + ": non-finite adapter parameter");
  return model;
}

bool bit_equal(const AdapterModel& a, const AdapterModel& b) noexcept {
  auto same = [](const std::vector<float>& x, const std::vector<float>& y) {
    return x.size() == y.size() && std::memcmp(x.data(), y.data(), x.size() * sizeof(float)) == 0;
  };
  return a.d == b.d && a.h == b.h && a.activation == b.activation && same(a.w1, b.w1) &&
         same(a.b1, b.b1) && same(a.w2, b.w2) && same(a.b2, b.b2);
}

}  // namespace bitext
