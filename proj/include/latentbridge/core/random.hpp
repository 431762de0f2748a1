#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "latentbridge/core/tensor.hpp"

namespace latentbridge {

using Rng = std::mt19937_64;

/// Derives an independent stream from a base seed and a stream index
/// (splitmix64 finalizer, so nearby seeds give unrelated streams).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

template <typename Scalar>
Mat<Scalar> standard_normal(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Mat<Scalar> out(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) out(i, j) = static_cast<Scalar>(normal(rng));
  return out;
}

template <typename Scalar>
Mat<Scalar> uniform(Rng& rng, Eigen::Index rows, Eigen::Index cols, double lo, double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Mat<Scalar> out(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) out(i, j) = static_cast<Scalar>(dist(rng));
  return out;
}

/// Symmetric Dirichlet(alpha * 1_m) draw via normalized Gamma variates.
inline std::vector<double> sample_dirichlet(Rng& rng, int m, double alpha) {
  require(m >= 1, "random", "dirichlet needs at least one component");
  require(alpha > 0.0, "random", "dirichlet concentration must be positive");
  std::gamma_distribution<double> gamma(alpha, 1.0);
  std::vector<double> weights(static_cast<std::size_t>(m));
  double total = 0.0;
  // All-zero draws are possible for tiny alpha; redraw.
  while (total <= 0.0) {
    total = 0.0;
    for (auto& w : weights) {
      w = gamma(rng);
      total += w;
    }
  }
  for (auto& w : weights) w /= total;
  return weights;
}

/// Uniform subset of size m from {0, ..., n-1} without replacement, in draw order.
inline std::vector<int> sample_subset(Rng& rng, int n, int m) {
  require(m >= 0 && m <= n, "random", "subset size out of range");
  std::vector<int> pool(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) pool[static_cast<std::size_t>(i)] = i;
  for (int i = 0; i < m; ++i) {
    std::uniform_int_distribution<int> pick(i, n - 1);
    std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(pick(rng))]);
  }
  pool.resize(static_cast<std::size_t>(m));
  return pool;
}

}  // namespace latentbridge
