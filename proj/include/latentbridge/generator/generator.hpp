#pragma once

#include <atomic>
#include <memory>
#include <string>

#include "latentbridge/core/binary_io.hpp"
#include "latentbridge/core/random.hpp"
#include "latentbridge/core/tensor.hpp"
#include "latentbridge/embedding/toy_world.hpp"

namespace latentbridge {

enum class LatentSpace { flat, extended };

inline std::string to_string(LatentSpace s) { return s == LatentSpace::flat ? "flat" : "extended"; }

struct LatentShape {
  int layers = 1;  // 1 for flat latents
  int width = 64;
  LatentSpace space = LatentSpace::flat;

  int size() const { return layers * width; }
  friend bool operator==(const LatentShape&, const LatentShape&) = default;
};

/// Generator latent (or an offset in latent space), flattened layer-major.
template <typename Scalar>
struct GeneratorLatent {
  LatentShape shape;
  Vec<Scalar> values;

  GeneratorLatent operator+(const GeneratorLatent& other) const {
    require(shape == other.shape, "generator", "latent shape mismatch in addition");
    return {shape, values + other.values};
  }
};

/// A frozen latent-to-image generator. The forward counter counts images
/// produced; batched calls advance it by the batch size.
template <typename Scalar>
class GeneratorBackend {
 public:
  virtual ~GeneratorBackend() = default;

  virtual LatentShape latent_shape() const = 0;
  virtual ImageShape image_shape() const = 0;
  virtual const GeneratorLatent<Scalar>& mean_latent() const = 0;
  virtual std::uint64_t parameter_checksum() const = 0;
  virtual std::string source_tag() const = 0;

  /// latents: one latent per column -> one image per column.
  Mat<Scalar> generate_batch(const Mat<Scalar>& latents) const {
    require(latents.rows() == latent_shape().size(), "generator",
            "latent has " + std::to_string(latents.rows()) + " entries, backend expects " +
                std::to_string(latent_shape().size()));
    Mat<Scalar> out = forward(latents);
    forward_calls_.fetch_add(static_cast<std::uint64_t>(latents.cols()), std::memory_order_relaxed);
    return out;
  }

  BasicImage<Scalar> generate(const GeneratorLatent<Scalar>& w) const {
    require(w.shape == latent_shape(), "generator", "latent shape does not match the backend");
    return BasicImage<Scalar>(image_shape(), generate_batch(w.values));
  }

  /// Vector-Jacobian product of generate_batch w.r.t. the latents.
  /// Does not count as a forward call.
  virtual Mat<Scalar> generate_vjp(const Mat<Scalar>& latents, const Mat<Scalar>& grad_images) const {
    (void)latents;
    (void)grad_images;
    throw ConfigError("generator", "backend '" + source_tag() + "' is not differentiable");
  }

  std::uint64_t forward_calls() const { return forward_calls_.load(std::memory_order_relaxed); }

 protected:
  virtual Mat<Scalar> forward(const Mat<Scalar>& latents) const = 0;

 private:
  mutable std::atomic<std::uint64_t> forward_calls_{0};
};

struct ToyGeneratorConfig {
  int latent_dim = 64;
  double gain = 1.5;  // std of first-stage pre-activations under N(0, I) latents
  int mean_samples = 10000;
  std::uint64_t seed = 0x6E4;
};

/// Two-stage toy decoder: h = tanh(W w + b) picks the toy-world factors, then
/// the world's affine renderer maps h to pixels. Every output is a valid
/// toy-world image, so attributes of generated images are recoverable.
template <typename Scalar>
class ToyGenerator final : public GeneratorBackend<Scalar> {
 public:
  ToyGenerator(std::shared_ptr<const ToyWorld<Scalar>> world, ToyGeneratorConfig config = {})
      : world_(std::move(world)), config_(config) {
    require(world_ != nullptr, "generator", "toy generator needs a world");
    require(config.latent_dim > 0 && config.mean_samples > 0, "generator", "invalid toy generator config");
    Rng rng(derive_seed(config.seed, 31));
    const int factors = world_->factor_dims();
    Mat<double> w = standard_normal<double>(rng, factors, config.latent_dim) *
                    (config.gain / std::sqrt(static_cast<double>(config.latent_dim)));
    Vec<double> b = standard_normal<double>(rng, factors, 1) * 0.1;
    weight_ = w.cast<Scalar>();
    bias_ = b.cast<Scalar>();

    // Mean latent: average of seeded prior samples, frozen here.
    Rng mean_rng(derive_seed(config.seed, 32));
    Vec<double> acc = Vec<double>::Zero(config.latent_dim);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int s = 0; s < config.mean_samples; ++s)
      for (int i = 0; i < config.latent_dim; ++i) acc[i] += normal(mean_rng);
    mean_ = {latent_shape(), (acc / config.mean_samples).cast<Scalar>()};

    Fnv1a h;
    h.update(weight_.data(), sizeof(Scalar) * static_cast<std::size_t>(weight_.size()));
    h.update(bias_.data(), sizeof(Scalar) * static_cast<std::size_t>(bias_.size()));
    const auto wc = world_->checksum();
    h.update(&wc, sizeof(wc));
    checksum_ = h.digest();
  }

  LatentShape latent_shape() const override { return {1, config_.latent_dim, LatentSpace::flat}; }
  ImageShape image_shape() const override { return world_->shape(); }
  const GeneratorLatent<Scalar>& mean_latent() const override { return mean_; }
  std::uint64_t parameter_checksum() const override { return checksum_; }
  const ToyWorld<Scalar>& world() const { return *world_; }
  const ToyGeneratorConfig& config() const { return config_; }

  std::string source_tag() const override {
    return "toy_generator(latent=" + std::to_string(config_.latent_dim) + ",seed=" + std::to_string(config_.seed) + ")";
  }

  /// First-stage output: the toy-world factors the latent selects.
  Mat<Scalar> factors(const Mat<Scalar>& latents) const {
    return ((weight_ * latents).colwise() + bias_).array().tanh().matrix();
  }

  Mat<Scalar> generate_vjp(const Mat<Scalar>& latents, const Mat<Scalar>& grad_images) const override {
    require(latents.cols() == grad_images.cols(), "generator", "batch size mismatch in generate_vjp");
    Mat<Scalar> h = factors(latents);
    Mat<Scalar> dh = world_->basis().transpose() * grad_images;
    Mat<Scalar> dpre = dh.array() * (Scalar(1) - h.array().square());
    return weight_.transpose() * dpre;
  }

 protected:
  Mat<Scalar> forward(const Mat<Scalar>& latents) const override { return world_->render_factors(factors(latents)); }

 private:
  std::shared_ptr<const ToyWorld<Scalar>> world_;
  ToyGeneratorConfig config_;
  Mat<Scalar> weight_;
  Vec<Scalar> bias_;
  GeneratorLatent<Scalar> mean_;
  std::uint64_t checksum_ = 0;
};

}  // namespace latentbridge
