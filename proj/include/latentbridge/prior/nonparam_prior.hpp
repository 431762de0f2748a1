#pragma once

#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

#include "latentbridge/core/config.hpp"
#include "latentbridge/core/random.hpp"
#include "latentbridge/embedding/bank.hpp"

namespace latentbridge {

struct PriorConfig {
  int k = 50;
  int m = 8;
  double dirichlet_alpha = 1.0;
  std::uint64_t seed = 0;
  bool similarity_weighted_subset = false;

  /// Requires 1 <= m <= k <= bank size.
  void validate(int bank_size) const {
    if (k < 1) throw InputError("prior", "K must be at least 1");
    if (m < 1 || m > k) throw InputError("prior", "M must satisfy 1 <= M <= K");
    if (!(dirichlet_alpha > 0.0)) throw InputError("prior", "Dirichlet concentration must be positive");
    if (k > bank_size) {
      throw InputError("prior", "K (" + std::to_string(k) + ") exceeds bank size (" + std::to_string(bank_size) + ")");
    }
  }

  static PriorConfig from(const Config& c) {
    PriorConfig p;
    p.k = static_cast<int>(c.get_int("prior.k", p.k));
    p.m = static_cast<int>(c.get_int("prior.m", p.m));
    p.dirichlet_alpha = c.get_double("prior.alpha", p.dirichlet_alpha);
    p.seed = c.get_u64("prior.seed", p.seed);
    p.similarity_weighted_subset = c.get_bool("prior.similarity_weighted", p.similarity_weighted_subset);
    return p;
  }
};

struct Neighbor {
  int index = 0;
  std::string id;
  double similarity = 0.0;
};

/// Exact top-k by cosine similarity; ties go to the lower bank index.
template <typename Scalar>
std::vector<Neighbor> top_k(const EmbeddingBank& bank, const Vec<Scalar>& query, int k) {
  require(query.size() == bank.dim(), "prior",
          "query dimension " + std::to_string(query.size()) + " does not match bank dimension " +
              std::to_string(bank.dim()));
  if (k < 1 || k > bank.size()) {
    throw InputError("prior", "K (" + std::to_string(k) + ") must lie in [1, bank size = " +
                                  std::to_string(bank.size()) + "]");
  }
  const double qn = query.template cast<double>().norm();
  if (!(qn > 0.0)) throw NumericError("prior", "query embedding has zero norm");
  // Reported similarity divides by |q|.
  const Vec<double> sims = bank.vectors().transpose().cast<double>() * query.template cast<double>();

  std::vector<int> idx(static_cast<std::size_t>(bank.size()));
  std::iota(idx.begin(), idx.end(), 0);
  auto better = [&](int a, int b) { return sims[a] > sims[b] || (sims[a] == sims[b] && a < b); };
  std::partial_sort(idx.begin(), idx.begin() + k, idx.end(), better);

  std::vector<Neighbor> out;
  out.reserve(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) {
    const int j = idx[static_cast<std::size_t>(i)];
    out.push_back({j, bank.id(j), sims[j] / qn});
  }
  return out;
}

struct ContextSample {
  Embedding context;                // the convex combination, not re-normalized
  std::vector<int> neighbor_indices;  // bank indices of the M selected entries
  std::vector<double> weights;        // Dirichlet weights, aligned with neighbor_indices
};

/// sum_j weights_j * bank[indices_j], accumulated in double.
inline Embedding convex_combination(const EmbeddingBank& bank, const std::vector<int>& indices,
                                    const std::vector<double>& weights) {
  require(!indices.empty() && indices.size() == weights.size(), "prior", "indices and weights must align");
  Vec<double> acc = Vec<double>::Zero(bank.dim());
  for (std::size_t j = 0; j < indices.size(); ++j) {
    require(indices[j] >= 0 && indices[j] < bank.size(), "prior", "neighbor index out of range");
    acc += weights[j] * bank.vectors().col(indices[j]).cast<double>();
  }
  return {acc.cast<float>(), false};
}

/// Picks M of the given top-K neighbors (uniformly, or proportional to
/// similarity when configured) and a Dirichlet convex combination of them.
inline ContextSample sample_from_neighbors(const EmbeddingBank& bank, const std::vector<Neighbor>& neighbors,
                                           const PriorConfig& config, Rng& rng) {
  require(static_cast<int>(neighbors.size()) >= config.m, "prior", "fewer neighbors than M");
  std::vector<int> picks;
  if (config.similarity_weighted_subset) {
    std::vector<double> w;
    for (const auto& n : neighbors) w.push_back(std::max(n.similarity, 0.0) + 1e-12);
    for (int i = 0; i < config.m; ++i) {
      std::discrete_distribution<int> d(w.begin(), w.end());
      const int p = d(rng);
      picks.push_back(p);
      w[static_cast<std::size_t>(p)] = 0.0;
    }
  } else {
    picks = sample_subset(rng, static_cast<int>(neighbors.size()), config.m);
  }
  ContextSample s;
  for (int p : picks) s.neighbor_indices.push_back(neighbors[static_cast<std::size_t>(p)].index);
  s.weights = sample_dirichlet(rng, config.m, config.dirichlet_alpha);
  s.context = convex_combination(bank, s.neighbor_indices, s.weights);
  return s;
}

/// Non-parametric text -> image-embedding sample.
template <typename Scalar>
ContextSample sample_context(const EmbeddingBank& bank, const Vec<Scalar>& text_embedding, const PriorConfig& config,
                             Rng& rng) {
  config.validate(bank.size());
  return sample_from_neighbors(bank, top_k(bank, text_embedding, config.k), config, rng);
}

inline ContextSample sample_context(const EmbeddingBank& bank, const Embedding& text_embedding, const PriorConfig& config,
                                    Rng& rng) {
  return sample_context(bank, text_embedding.values, config, rng);
}

}  // namespace latentbridge
