#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>

#include "latentbridge/core/errors.hpp"

namespace latentbridge {

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

struct ImageShape {
  int channels = 3;
  int height = 32;
  int width = 32;

  int pixel_count() const { return channels * height * width; }
  int plane() const { return height * width; }
  friend bool operator==(const ImageShape&, const ImageShape&) = default;

  std::string str() const {
    return std::to_string(height) + "x" + std::to_string(width) + "x" + std::to_string(channels);
  }
};

/// A single image, channel-planar (all of channel 0, then channel 1, ...),
/// values nominally in [0, 1].
template <typename Scalar>
struct BasicImage {
  ImageShape shape;
  Vec<Scalar> pixels;

  BasicImage() = default;
  BasicImage(ImageShape s, Vec<Scalar> p) : shape(s), pixels(std::move(p)) {
    if (pixels.size() != shape.pixel_count()) {
      throw InputError("image", "pixel buffer of size " + std::to_string(pixels.size()) +
                                    " does not match shape " + shape.str());
    }
  }

  Scalar& at(int c, int y, int x) { return pixels[(c * shape.height + y) * shape.width + x]; }
  Scalar at(int c, int y, int x) const { return pixels[(c * shape.height + y) * shape.width + x]; }

  template <typename Other>
  BasicImage<Other> cast() const {
    return BasicImage<Other>(shape, pixels.template cast<Other>());
  }

  friend bool operator==(const BasicImage& a, const BasicImage& b) {
    return a.shape == b.shape && a.pixels == b.pixels;
  }
};

using Image = BasicImage<float>;

/// A batch of images of one shape; one image per column.
template <typename Scalar>
struct ImageBatch {
  ImageShape shape;
  Mat<Scalar> pixels;

  int size() const { return static_cast<int>(pixels.cols()); }

  BasicImage<Scalar> image(int i) const { return BasicImage<Scalar>(shape, pixels.col(i)); }

  static ImageBatch from_image(const BasicImage<Scalar>& img) {
    return ImageBatch{img.shape, Mat<Scalar>(img.pixels)};
  }
};

inline void require(bool condition, const char* module, const std::string& message) {
  if (!condition) throw InputError(module, message);
}

}  // namespace latentbridge
