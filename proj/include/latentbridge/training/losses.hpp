#pragma once

#include <cmath>
#include <string>

#include "latentbridge/embedding/embedding.hpp"
#include "latentbridge/training/perceptual.hpp"

namespace latentbridge {

struct LossWeights {
  double perceptual = 1.0;
  double clip_cycle = 1.0;
  double w_norm = 2e-4;
  double kl = 0.2;
};

struct LossComponents {
  double perceptual = 0.0;
  double clip_cycle = 0.0;
  double w_norm = 0.0;
  double kl = 0.0;
};

template <typename Scalar>
double perceptual_loss(const PerceptualMetric<Scalar>& metric, const BasicImage<Scalar>& x,
                       const BasicImage<Scalar>& x_hat) {
  require(x.shape == x_hat.shape, "training", "perceptual loss inputs differ in shape");
  return static_cast<double>(metric.distances(x.pixels, x_hat.pixels)[0]);
}

/// 1 - cos(E(x), E(x_hat)) per column, from precomputed unit embeddings.
template <typename Scalar>
Vec<Scalar> clip_cycle_from_embeddings(const Mat<Scalar>& ex, const Mat<Scalar>& ex_hat) {
  require(ex.rows() == ex_hat.rows() && ex.cols() == ex_hat.cols(), "training", "embedding batch shapes differ");
  Vec<Scalar> out(ex.cols());
  for (Eigen::Index j = 0; j < ex.cols(); ++j) out[j] = static_cast<Scalar>(1.0 - cosine_similarity(ex.col(j), ex_hat.col(j)));
  return out;
}

template <typename Scalar>
double clip_cycle_loss(const EmbeddingBackend<Scalar>& embedder, const BasicImage<Scalar>& x,
                       const BasicImage<Scalar>& x_hat) {
  const auto a = embedder.embed_image(x);
  const auto b = embedder.embed_image(x_hat);
  return 1.0 - cosine_similarity(a.values, b.values);
}

/// Squared L2 norm of the latent offset.
template <typename Derived>
double w_norm_loss(const Eigen::MatrixBase<Derived>& offset) {
  return offset.template cast<double>().squaredNorm();
}

/// KL(N(mu, exp(logvar)) || N(0, I)) = 0.5 * sum(mu^2 + exp(logvar) - logvar - 1)
template <typename A, typename B>
double kl_loss(const Eigen::MatrixBase<A>& mu, const Eigen::MatrixBase<B>& logvar) {
  require(mu.size() == logvar.size(), "training", "mu and logvar sizes differ");
  const auto m = mu.template cast<double>().array();
  const auto lv = logvar.template cast<double>().array();
  return 0.5 * (m.square() + lv.exp() - lv - 1.0).sum();
}

inline double total_loss(const LossComponents& c, const LossWeights& w) {
  const std::pair<const char*, double> parts[] = {
      {"perceptual", c.perceptual}, {"clip_cycle", c.clip_cycle}, {"w_norm", c.w_norm}, {"kl", c.kl}};
  for (const auto& [name, value] : parts) {
    if (!std::isfinite(value)) throw NumericError("training", std::string("non-finite loss component '") + name + "'");
  }
  return w.perceptual * c.perceptual + w.clip_cycle * c.clip_cycle + w.w_norm * c.w_norm + w.kl * c.kl;
}

}  // namespace latentbridge
