#pragma once

// Reference implementations used only by tests. They share no code with the
// library: plain loops, full sorts, extended precision.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <random>
#include <vector>

#include <boost/multiprecision/cpp_bin_float.hpp>

#include "bitext/corpus_io.hpp"

namespace oracle {

using hp = boost::multiprecision::cpp_bin_float_50;

inline hp hp_cosine(const std::vector<double>& u, const std::vector<double>& v) {
  hp dot = 0, nu = 0, nv = 0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += hp(u[i]) * hp(v[i]);
    nu += hp(u[i]) * hp(u[i]);
    nv += hp(v[i]) * hp(v[i]);
  }
  return dot / (boost::multiprecision::sqrt(nu) * boost::multiprecision::sqrt(nv));
}

inline hp hp_euclidean(const std::vector<double>& u, const std::vector<double>& v) {
  hp acc = 0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    hp diff = hp(u[i]) - hp(v[i]);
    acc += diff * diff;
  }
  return boost::multiprecision::sqrt(acc);
}

inline std::vector<double> row(const bitext::EmbeddingMatrix& m, std::size_t i) {
  auto r = m.row(i);
  return {r.begin(), r.end()};
}

/// Naive 64-bit pairwise score, same formula as documented for the library:
/// cosine = dot / (|u| |v|) clamped; euclidean = sqrt(sum diff^2).
inline double naive_score(const bitext::EmbeddingMatrix& q, std::size_t i,
                          const bitext::EmbeddingMatrix& t, std::size_t j, bool cosine) {
  const std::size_t d = q.dim();
  const float* a = q.data().data() + i * d;
  const float* b = t.data().data() + j * d;
  if (cosine) {
    double dot = 0, na = 0, nb = 0;
    for (std::size_t k = 0; k < d; ++k) dot += static_cast<double>(a[k]) * b[k];
    for (std::size_t k = 0; k < d; ++k) na += static_cast<double>(a[k]) * a[k];
    for (std::size_t k = 0; k < d; ++k) nb += static_cast<double>(b[k]) * b[k];
    double c = dot / (std::sqrt(na) * std::sqrt(nb));
    return c > 1.0 ? 1.0 : (c < -1.0 ? -1.0 : c);
  }
  double acc = 0;
  for (std::size_t k = 0; k < d; ++k) {
    const double diff = static_cast<double>(a[k]) - static_cast<double>(b[k]);
    acc += diff * diff;
  }
  return std::sqrt(acc);
}

struct Ranked {
  std::size_t index;
  double score;
};

/// Every target scored, fully sorted best-first with index tie-break, first k kept.
inline std::vector<std::vector<Ranked>> full_sort_top_k(const bitext::EmbeddingMatrix& q,
                                                        const bitext::EmbeddingMatrix& t,
                                                        bool cosine, std::size_t k) {
  std::vector<std::vector<Ranked>> out(q.count());
  for (std::size_t i = 0; i < q.count(); ++i) {
    std::vector<Ranked> all(t.count());
    for (std::size_t j = 0; j < t.count(); ++j) all[j] = {j, naive_score(q, i, t, j, cosine)};
    std::sort(all.begin(), all.end(), [cosine](const Ranked& a, const Ranked& b) {
      if (a.score != b.score) return cosine ? a.score > b.score : a.score < b.score;
      return a.index < b.index;
    });
    all.resize(k);
    out[i] = std::move(all);
  }
  return out;
}

/// Straightforward d -> h -> d forward pass in double:
/// out = W2 act(W1 x + b1) + b2 with W1 (h x d), W2 (d x h) row-major.
inline std::vector<double> mlp_forward(const std::vector<double>& w1, const std::vector<double>& b1,
                                       const std::vector<double>& w2, const std::vector<double>& b2,
                                       bool relu, const std::vector<double>& x) {
  const std::size_t d = x.size();
  const std::size_t h = b1.size();
  std::vector<double> hidden(h);
  for (std::size_t j = 0; j < h; ++j) {
    double z = b1[j];
    for (std::size_t i = 0; i < d; ++i) z += w1[j * d + i] * x[i];
    hidden[j] = relu ? std::max(0.0, z) : z;
  }
  std::vector<double> out(d);
  for (std::size_t i = 0; i < d; ++i) {
    double o = b2[i];
    for (std::size_t j = 0; j < h; ++j) o += w2[i * h + j] * hidden[j];
    out[i] = o;
  }
  return out;
}

inline double one_minus_cosine(const std::vector<double>& a, const std::vector<double>& b) {
  return 1.0 - static_cast<double>(hp_cosine(a, b));
}

/// Central difference (f(p + s) - f(p - s)) / 2s of a scalar function of
/// one coordinate.
inline double central_difference(const std::function<double(double)>& f, double at, double step) {
  return (f(at + step) - f(at - step)) / (2.0 * step);
}

inline bitext::EmbeddingMatrix random_matrix(std::size_t count, std::size_t dim, std::mt19937_64& rng,
                                             double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<float> u(static_cast<float>(lo), static_cast<float>(hi));
  std::vector<float> data(count * dim);
  for (auto& x : data) x = u(rng);
  return bitext::EmbeddingMatrix(dim, count, std::move(data));
}

}  // namespace oracle
