#pragma once

#include "latentbridge/core/binary_io.hpp"
#include "latentbridge/core/random.hpp"
#include "latentbridge/core/tensor.hpp"

namespace latentbridge {

/// Identity-feature extractor used for the diversity metric.
template <typename Scalar>
class IdentityBackend {
 public:
  virtual ~IdentityBackend() = default;
  virtual int feature_dim() const = 0;
  virtual Mat<Scalar> features(const Mat<Scalar>& pixels) const = 0;
};

/// Fixed seeded Gaussian projection of the mid-gray-centered image.
template <typename Scalar>
class ToyIdentity final : public IdentityBackend<Scalar> {
 public:
  ToyIdentity(ImageShape shape, int dim = 64, std::uint64_t seed = 0x1DE)
      : shape_(shape) {
    require(dim > 0, "evaluation", "identity feature dimension must be positive");
    Rng rng(derive_seed(seed, 71));
    projection_ = (standard_normal<double>(rng, dim, shape.pixel_count()) /
                   std::sqrt(static_cast<double>(shape.pixel_count())))
                      .template cast<Scalar>();
  }

  int feature_dim() const override { return static_cast<int>(projection_.rows()); }

  Mat<Scalar> features(const Mat<Scalar>& pixels) const override {
    require(pixels.rows() == shape_.pixel_count(), "evaluation", "identity backend expects shape " + shape_.str());
    return projection_ * (pixels.array() - Scalar(0.5)).matrix();
  }

 private:
  ImageShape shape_;
  Mat<Scalar> projection_;
};

}  // namespace latentbridge
