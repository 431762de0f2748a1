#pragma once

#include <algorithm>
#include <chrono>
#include <fstream>
#include <functional>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "latentbridge/embedding/bank.hpp"
#include "latentbridge/eval/identity.hpp"
#include "latentbridge/prior/nonparam_prior.hpp"

namespace latentbridge {

struct EvalProtocol {
  std::vector<std::string> captions;
  int images_per_caption = 25;
  int negatives_per_query = 99;
  std::vector<int> ks{1, 5, 10, 20};
  std::uint64_t seed = 0;

  void validate() const {
    require(!ks.empty(), "evaluation", "at least one cutoff k is required");
    for (int k : ks) require(k >= 1, "evaluation", "cutoffs must be positive");
    const int max_k = *std::max_element(ks.begin(), ks.end());
    require(negatives_per_query >= max_k - 1, "evaluation", "negatives_per_query must be at least max(ks) - 1");
    require(images_per_caption >= 2, "evaluation", "diversity needs at least two images per caption");
  }
};

/// Hit counts per cutoff; mergeable across prompts.
struct RetrievalTally {
  std::vector<int> ks;
  std::vector<long> hits;
  long queries = 0;

  explicit RetrievalTally(std::vector<int> cutoffs = {1, 5, 10, 20})
      : ks(std::move(cutoffs)), hits(ks.size(), 0) {}

  void merge(const RetrievalTally& o) {
    require(o.ks == ks, "evaluation", "cannot merge tallies with different cutoffs");
    for (std::size_t i = 0; i < hits.size(); ++i) hits[i] += o.hits[i];
    queries += o.queries;
  }

  std::vector<double> accuracy() const {
    std::vector<double> a(hits.size(), 0.0);
    if (queries == 0) return a;
    for (std::size_t i = 0; i < hits.size(); ++i) a[i] = static_cast<double>(hits[i]) / static_cast<double>(queries);
    return a;
  }
};

/// Each generated embedding is ranked against `negatives_per_query` pool
/// entries (drawn per query) by cosine similarity to the prompt. Negatives
/// that tie the generated image rank above it.
inline RetrievalTally retrieval_accuracy(const Mat<float>& generated, const Vec<float>& prompt,
                                         const Mat<float>& negative_pool, const EvalProtocol& protocol, Rng& rng) {
  protocol.validate();
  require(generated.rows() == prompt.size() && negative_pool.rows() == prompt.size(), "evaluation",
          "embedding dimensions differ");
  if (negative_pool.cols() < protocol.negatives_per_query) {
    throw InputError("evaluation", "negative pool has " + std::to_string(negative_pool.cols()) + " entries, need " +
                                       std::to_string(protocol.negatives_per_query));
  }
  const Vec<double> neg_sims = [&] {
    Vec<double> s(negative_pool.cols());
    for (Eigen::Index j = 0; j < negative_pool.cols(); ++j) s[j] = cosine_similarity(prompt, negative_pool.col(j));
    return s;
  }();
  RetrievalTally tally(protocol.ks);
  for (Eigen::Index g = 0; g < generated.cols(); ++g) {
    const double own = cosine_similarity(prompt, generated.col(g));
    const auto negatives = sample_subset(rng, static_cast<int>(negative_pool.cols()), protocol.negatives_per_query);
    long rank = 1;
    for (int j : negatives)
      if (neg_sims[j] >= own) ++rank;
    for (std::size_t i = 0; i < protocol.ks.size(); ++i)
      if (rank <= protocol.ks[i]) ++tally.hits[i];
    ++tally.queries;
  }
  return tally;
}

/// Mean over unordered pairs of (1 - cosine similarity) of identity features.
inline double id_diversity_from_features(const Mat<float>& features) {
  const auto n = features.cols();
  if (n < 2) throw InputError("evaluation", "identity diversity needs at least two images");
  double total = 0.0;
  long pairs = 0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j, ++pairs) total += 1.0 - cosine_similarity(features.col(i), features.col(j));
  return total / static_cast<double>(pairs);
}

inline double id_diversity(const ImageBatch<float>& images, const IdentityBackend<float>& identity) {
  if (images.size() < 2) throw InputError("evaluation", "identity diversity needs at least two images");
  return id_diversity_from_features(identity.features(images.pixels));
}

/// Mean wall-clock seconds per image over n single-image calls, after one
/// untimed warm-up call.
inline double timing_report(const std::function<void()>& generate_one, int n = 20) {
  require(n >= 1, "evaluation", "timing needs at least one call");
  generate_one();
  const auto start = std::chrono::steady_clock::now();
  for (int i = 0; i < n; ++i) generate_one();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() / n;
}

/// Top neighbors in the bank for each generated embedding (one per column).
inline std::vector<std::vector<Neighbor>> nn_report(const Mat<float>& generated, const EmbeddingBank& bank, int top = 5) {
  std::vector<std::vector<Neighbor>> out;
  for (Eigen::Index j = 0; j < generated.cols(); ++j) out.push_back(top_k(bank, Vec<float>(generated.col(j)), top));
  return out;
}

inline std::string format_nn_report(const std::vector<std::string>& names, const std::vector<std::vector<Neighbor>>& r) {
  std::ostringstream s;
  s << "image,rank,id,similarity\n";
  for (std::size_t i = 0; i < r.size(); ++i)
    for (std::size_t k = 0; k < r[i].size(); ++k)
      s << names[i] << "," << (k + 1) << "," << r[i][k].id << "," << std::setprecision(6) << r[i][k].similarity << "\n";
  return s.str();
}

struct ModelReport {
  std::string model;
  std::vector<int> ks;
  std::vector<double> accuracy;
  double id_diversity = 0.0;
  double seconds_per_image = 0.0;
};

/// Fixed-width table with one row per model.
inline std::string format_table(const std::vector<ModelReport>& rows) {
  std::ostringstream s;
  s << std::left << std::setw(24) << "model";
  if (!rows.empty())
    for (int k : rows.front().ks) s << std::right << std::setw(9) << ("top" + std::to_string(k));
  s << std::right << std::setw(10) << "id_div" << std::setw(14) << "sec/image" << "\n";
  for (const auto& r : rows) {
    s << std::left << std::setw(24) << r.model << std::right << std::fixed;
    for (double a : r.accuracy) s << std::setw(9) << std::setprecision(3) << a;
    s << std::setw(10) << std::setprecision(3) << r.id_diversity << std::setw(14) << std::setprecision(6)
      << r.seconds_per_image << "\n";
  }
  return s.str();
}

inline std::string format_accuracy_csv(const std::vector<ModelReport>& rows) {
  std::ostringstream s;
  s << "model,k,accuracy\n";
  for (const auto& r : rows)
    for (std::size_t i = 0; i < r.ks.size(); ++i) s << r.model << "," << r.ks[i] << "," << r.accuracy[i] << "\n";
  return s.str();
}

inline std::string format_diversity_csv(const std::vector<ModelReport>& rows) {
  std::ostringstream s;
  s << "model,id_div,sec_per_image\n";
  for (const auto& r : rows) s << r.model << "," << r.id_diversity << "," << r.seconds_per_image << "\n";
  return s.str();
}

/// Throws if any report has accuracy decreasing in k.
inline void check_accuracy_monotone(const ModelReport& r) {
  for (std::size_t i = 1; i < r.accuracy.size(); ++i)
    if (r.ks[i] >= r.ks[i - 1] && r.accuracy[i] < r.accuracy[i - 1]) {
      throw NumericError("evaluation", "accuracy decreases with k for model '" + r.model + "'");
    }
}

}  // namespace latentbridge
