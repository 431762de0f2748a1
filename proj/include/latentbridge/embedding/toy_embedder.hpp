#pragma once

#include <memory>

#include "latentbridge/embedding/embedding.hpp"
#include "latentbridge/embedding/toy_world.hpp"

namespace latentbridge {

struct ToyEmbedderConfig {
  int dim = 512;
  double gap = 0.3;       // magnitude of the text-side modality gap vector
  double leakage = 0.05;  // how much nuisance leaks into image embeddings
  std::uint64_t seed = 0xC11F;
};

/// Toy joint embedder over a ToyWorld.
///   image: normalize(P a + leakage * Q n), with (a, n) recovered from pixels
///   text : normalize(P a_partial + gap * g)
/// P and Q have N(0, 1/dim) entries so they act as near-isometries; g is a
/// fixed unit vector.
template <typename Scalar>
class ToyEmbedder final : public EmbeddingBackend<Scalar> {
 public:
  ToyEmbedder(std::shared_ptr<const ToyWorld<Scalar>> world, ToyEmbedderConfig config = {})
      : world_(std::move(world)), config_(config) {
    require(world_ != nullptr, "embedding", "toy embedder needs a world");
    require(config.dim > 0, "embedding", "embedding dimension must be positive");
    require(config.gap >= 0.0 && config.leakage >= 0.0, "embedding", "gap and leakage must be non-negative");
    Rng rng(derive_seed(config.seed, 21));
    const double s = 1.0 / std::sqrt(static_cast<double>(config.dim));
    Mat<double> p = standard_normal<double>(rng, config.dim, world_->attribute_dims()) * s;
    Mat<double> q = standard_normal<double>(rng, config.dim, world_->nuisance_dims()) * s;
    Vec<double> g = standard_normal<double>(rng, config.dim, 1);
    g /= g.norm();
    projection_ = p.cast<Scalar>();
    nuisance_projection_ = q.cast<Scalar>();
    gap_direction_ = g.cast<Scalar>();

    Fnv1a h;
    h.update(projection_.data(), sizeof(Scalar) * static_cast<std::size_t>(projection_.size()));
    h.update(nuisance_projection_.data(), sizeof(Scalar) * static_cast<std::size_t>(nuisance_projection_.size()));
    h.update(gap_direction_.data(), sizeof(Scalar) * static_cast<std::size_t>(gap_direction_.size()));
    const auto wc = world_->checksum();
    h.update(&wc, sizeof(wc));
    checksum_ = h.digest();
  }

  int dim() const override { return config_.dim; }
  ImageShape image_shape() const override { return world_->shape(); }
  const ToyEmbedderConfig& config() const { return config_; }
  const ToyWorld<Scalar>& world() const { return *world_; }
  const Mat<Scalar>& projection() const { return projection_; }
  const Vec<Scalar>& gap_direction() const { return gap_direction_; }

  std::string source_tag() const override {
    std::ostringstream s;
    s << "toy(dim=" << config_.dim << ",gap=" << config_.gap << ",leakage=" << config_.leakage
      << ",seed=" << config_.seed << ",world_seed=" << world_->config().seed << ")";
    return s.str();
  }

  std::uint64_t parameter_checksum() const override { return checksum_; }

  /// Unnormalized embedding directions for factor columns.
  Mat<Scalar> raw_from_factors(const Mat<Scalar>& factors) const {
    const int ka = world_->attribute_dims();
    const int kn = world_->nuisance_dims();
    Mat<Scalar> u = projection_ * factors.topRows(ka);
    if (kn > 0 && config_.leakage > 0.0) {
      u.noalias() += (Scalar(config_.leakage) * nuisance_projection_) * factors.bottomRows(kn);
    }
    return u;
  }

  Mat<Scalar> embed_images(const Mat<Scalar>& pixels) const override {
    Mat<Scalar> u = raw_from_factors(world_->analyze(pixels));
    for (Eigen::Index j = 0; j < u.cols(); ++j) u.col(j) = unit_normalized(u.col(j), "embedding");
    return u;
  }

  Mat<Scalar> embed_images_vjp(const Mat<Scalar>& pixels, const Mat<Scalar>& grad) const override {
    const int ka = world_->attribute_dims();
    const int kn = world_->nuisance_dims();
    Mat<Scalar> u = raw_from_factors(world_->analyze(pixels));
    Mat<Scalar> du(u.rows(), u.cols());
    for (Eigen::Index j = 0; j < u.cols(); ++j) {
      const Scalar norm = u.col(j).norm();
      if (!(norm > Scalar(0))) throw NumericError("embedding", "zero-norm image embedding");
      Vec<Scalar> y = u.col(j) / norm;
      du.col(j) = (grad.col(j) - y * y.dot(grad.col(j))) / norm;
    }
    Mat<Scalar> dfactors(world_->factor_dims(), u.cols());
    dfactors.topRows(ka) = projection_.transpose() * du;
    if (kn > 0) dfactors.bottomRows(kn) = (Scalar(config_.leakage) * nuisance_projection_.transpose()) * du;
    return world_->analyze_vjp(dfactors);
  }

  BasicEmbedding<Scalar> embed_text(const std::string& text) const override {
    return embed_descriptor(AttributeDescriptor::parse(text, world_->attribute_dims()));
  }

  BasicEmbedding<Scalar> embed_descriptor(const AttributeDescriptor& d) const {
    if (d.targets.empty()) throw InputError("embedding", "empty attribute descriptor");
    Vec<double> a = d.partial_vector(world_->attribute_dims());
    Vec<double> v = projection_.template cast<double>() * a + config_.gap * gap_direction_.template cast<double>();
    return {Vec<Scalar>(unit_normalized(v, "embedding").template cast<Scalar>()), true};
  }

 private:
  std::shared_ptr<const ToyWorld<Scalar>> world_;
  ToyEmbedderConfig config_;
  Mat<Scalar> projection_;
  Mat<Scalar> nuisance_projection_;
  Vec<Scalar> gap_direction_;
  std::uint64_t checksum_ = 0;
};

}  // namespace latentbridge
