#pragma once

#include <cmath>
#include <numbers>

#include "latentbridge/core/binary_io.hpp"
#include "latentbridge/core/random.hpp"
#include "latentbridge/core/tensor.hpp"

namespace latentbridge {

struct ToyWorldConfig {
  int attribute_dims = 8;
  int nuisance_dims = 4;
  ImageShape shape{3, 32, 32};
  std::uint64_t seed = 0x70F;
};

template <typename Scalar>
struct ToyWorldSample {
  Vec<Scalar> attributes;
  Vec<Scalar> nuisance;
  BasicImage<Scalar> image;
};

/// Desk-scale image world. An image is 0.5 + B [a; n] where B holds smooth
/// seeded spatial patterns, one per factor. Attribute and nuisance entries
/// live in [-1, 1] and the basis is scaled so pixels stay inside [0.05, 0.95].
template <typename Scalar>
class ToyWorld {
 public:
  explicit ToyWorld(ToyWorldConfig config = {}) : config_(config) {
    require(config.attribute_dims > 0 && config.nuisance_dims >= 0, "toy_world",
            "factor dimensions must be positive");
    const int factors = factor_dims();
    const int pixels = config.shape.pixel_count();
    require(pixels >= factors, "toy_world", "image too small for the factor count");

    Rng rng(derive_seed(config.seed, 11));
    std::uniform_int_distribution<int> freq(0, 3);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
    std::normal_distribution<double> amp(0.0, 1.0);

    Mat<double> raw(pixels, factors);
    for (int f = 0; f < factors; ++f) {
      const bool is_nuisance = f >= config.attribute_dims;
      for (int c = 0; c < config.shape.channels; ++c) {
        // Nuisance patterns are broad washes (background/pose analogs).
        const int modes = 3;
        std::vector<double> fx(modes), fy(modes), ph(modes), a(modes);
        for (int m = 0; m < modes; ++m) {
          do {
            fx[m] = is_nuisance ? freq(rng) % 2 : freq(rng);
            fy[m] = is_nuisance ? freq(rng) % 2 : freq(rng);
          } while (fx[m] == 0 && fy[m] == 0);
          ph[m] = phase(rng);
          a[m] = amp(rng);
        }
        for (int y = 0; y < config.shape.height; ++y) {
          for (int x = 0; x < config.shape.width; ++x) {
            double v = 0.0;
            for (int m = 0; m < modes; ++m) {
              v += a[m] * std::cos(2.0 * std::numbers::pi *
                                       (fx[m] * x / config.shape.width + fy[m] * y / config.shape.height) +
                                   ph[m]);
            }
            raw((c * config.shape.height + y) * config.shape.width + x, f) = v;
          }
        }
      }
    }

    Eigen::HouseholderQR<Mat<double>> qr(raw);
    Mat<double> q = qr.householderQ() * Mat<double>::Identity(pixels, factors);
    const double max_row_l1 = q.cwiseAbs().rowwise().sum().maxCoeff();
    const double scale = 0.45 / max_row_l1;
    basis_ = (q * scale).template cast<Scalar>();
    analysis_ = (q.transpose() / scale).template cast<Scalar>();

    Fnv1a h;
    h.update(basis_.data(), sizeof(Scalar) * static_cast<std::size_t>(basis_.size()));
    checksum_ = h.digest();
  }

  const ToyWorldConfig& config() const { return config_; }
  const ImageShape& shape() const { return config_.shape; }
  int attribute_dims() const { return config_.attribute_dims; }
  int nuisance_dims() const { return config_.nuisance_dims; }
  int factor_dims() const { return config_.attribute_dims + config_.nuisance_dims; }
  const Mat<Scalar>& basis() const { return basis_; }
  std::uint64_t checksum() const { return checksum_; }

  /// factors: (attribute_dims + nuisance_dims) x n  ->  pixels x n
  Mat<Scalar> render_factors(const Mat<Scalar>& factors) const {
    require(factors.rows() == factor_dims(), "toy_world", "factor matrix has wrong row count");
    return (basis_ * factors).array() + Scalar(0.5);
  }

  BasicImage<Scalar> render(const Vec<Scalar>& attributes, const Vec<Scalar>& nuisance) const {
    require(attributes.size() == attribute_dims() && nuisance.size() == nuisance_dims(), "toy_world",
            "attribute/nuisance dimension mismatch");
    Vec<Scalar> factors(factor_dims());
    factors << attributes, nuisance;
    return BasicImage<Scalar>(config_.shape, render_factors(factors));
  }

  /// Least-squares recovery of [a; n] from pixels; exact on rendered images.
  Mat<Scalar> analyze(const Mat<Scalar>& pixels) const {
    require(pixels.rows() == config_.shape.pixel_count(), "toy_world",
            "image does not have shape " + config_.shape.str());
    return analysis_ * (pixels.array() - Scalar(0.5)).matrix();
  }

  /// Vector-Jacobian product of analyze.
  Mat<Scalar> analyze_vjp(const Mat<Scalar>& grad_factors) const { return analysis_.transpose() * grad_factors; }

  ToyWorldSample<Scalar> sample(Rng& rng) const {
    Vec<Scalar> a = uniform<Scalar>(rng, attribute_dims(), 1, -1.0, 1.0);
    Vec<Scalar> n = uniform<Scalar>(rng, nuisance_dims(), 1, -1.0, 1.0);
    auto img = render(a, n);
    return {std::move(a), std::move(n), std::move(img)};
  }

  /// n fresh samples; factors are returned alongside the pixels.
  ImageBatch<Scalar> sample_batch(Rng& rng, int n, Mat<Scalar>* factors_out = nullptr) const {
    Mat<Scalar> factors = uniform<Scalar>(rng, factor_dims(), n, -1.0, 1.0);
    ImageBatch<Scalar> batch{config_.shape, render_factors(factors)};
    if (factors_out) *factors_out = std::move(factors);
    return batch;
  }

 private:
  ToyWorldConfig config_;
  Mat<Scalar> basis_;
  Mat<Scalar> analysis_;
  std::uint64_t checksum_ = 0;
};

}  // namespace latentbridge
