#pragma once

#include <memory>

#include "latentbridge/nn/layers.hpp"

namespace latentbridge {

/// Per-sample perceptual distance between two image batches.
template <typename Scalar>
class PerceptualMetric {
 public:
  virtual ~PerceptualMetric() = default;
  virtual ImageShape image_shape() const = 0;
  /// One distance per column pair.
  virtual Vec<Scalar> distances(const Mat<Scalar>& a, const Mat<Scalar>& b) const = 0;
  /// Gradient of sum_j weight_j * distance_j w.r.t. b.
  virtual Mat<Scalar> distances_vjp(const Mat<Scalar>& a, const Mat<Scalar>& b, const Vec<Scalar>& weight) const = 0;
  virtual std::uint64_t parameter_checksum() const = 0;
};

struct ToyPerceptualConfig {
  int scales = 3;
  int channels = 16;
  double bias_std = 0.1;
  double norm_eps = 1e-6;
  std::uint64_t seed = 0x1B1B5;
};

/// LPIPS-shaped surrogate: at each of `scales` resolutions (2x2 average
/// pooling between them) a fixed random 3x3 conv + leaky rectifier produces
/// features that are unit-normalized across channels per pixel; the distance
/// is the pixel-mean squared feature difference, summed over scales.
template <typename Scalar>
class ToyPerceptual final : public PerceptualMetric<Scalar> {
 public:
  explicit ToyPerceptual(ImageShape shape, ToyPerceptualConfig config = {}) : shape_(shape), config_(config) {
    require(config.scales >= 1 && config.channels >= 1, "training", "invalid perceptual metric config");
    Rng rng(derive_seed(config.seed, 51));
    Fnv1a h;
    for (int s = 0; s < config.scales; ++s) {
      nn::Conv2d<Scalar> conv("perceptual." + std::to_string(s), shape.channels, config.channels, 3, 1, 1);
      conv.weight.value = (standard_normal<double>(rng, conv.weight.value.rows(), conv.weight.value.cols()) *
                           std::sqrt(2.0 / static_cast<double>(conv.weight.value.cols())))
                              .template cast<Scalar>();
      conv.bias.value = (standard_normal<double>(rng, config.channels, 1) * config.bias_std).template cast<Scalar>();
      h.update(conv.weight.value.data(), sizeof(Scalar) * static_cast<std::size_t>(conv.weight.value.size()));
      h.update(conv.bias.value.data(), sizeof(Scalar) * static_cast<std::size_t>(conv.bias.value.size()));
      convs_.push_back(std::move(conv));
    }
    checksum_ = h.digest();
  }

  ImageShape image_shape() const override { return shape_; }
  std::uint64_t parameter_checksum() const override { return checksum_; }

  Vec<Scalar> distances(const Mat<Scalar>& a, const Mat<Scalar>& b) const override {
    check_inputs(a, b);
    const auto fa = features(a);
    const auto fb = features(b);
    Vec<Scalar> d = Vec<Scalar>::Zero(a.cols());
    for (std::size_t s = 0; s < fa.size(); ++s) {
      const Eigen::Index plane = fa[s].normalized.cols() / a.cols();
      Mat<Scalar> diff = fa[s].normalized - fb[s].normalized;
      Eigen::Matrix<Scalar, 1, Eigen::Dynamic> per_pixel = diff.colwise().squaredNorm();
      for (Eigen::Index j = 0; j < a.cols(); ++j) d[j] += per_pixel.segment(j * plane, plane).mean();
    }
    return d;
  }

  Mat<Scalar> distances_vjp(const Mat<Scalar>& a, const Mat<Scalar>& b, const Vec<Scalar>& weight) const override {
    check_inputs(a, b);
    require(weight.size() == a.cols(), "training", "perceptual weight vector has the wrong size");
    const auto fa = features(a);
    const auto fb = features(b);
    const int batch = static_cast<int>(a.cols());
    Mat<Scalar> grad_rows;  // gradient w.r.t. the centered input at the current scale
    for (std::size_t s = fa.size(); s-- > 0;) {
      const auto& B = fb[s];
      const Eigen::Index plane = B.normalized.cols() / batch;
      // d/d(normalized_b) of weight_j * mean_p ||n_a - n_b||^2
      Mat<Scalar> g = Scalar(2) * (B.normalized - fa[s].normalized);
      for (int j = 0; j < batch; ++j) g.middleCols(j * plane, plane) *= weight[j] / Scalar(plane);
      // through n = f / sqrt(|f|^2 + eps)
      Eigen::Matrix<Scalar, 1, Eigen::Dynamic> dot = (B.normalized.array() * g.array()).colwise().sum();
      Mat<Scalar> df = (g - B.normalized * dot.asDiagonal()) * B.inv_norm.asDiagonal();
      nn::leaky_relu_backward_inplace(df, B.preact, Scalar(0.2));
      Mat<Scalar> dx = convs_[s].input_grad(df, B.geo);
      if (grad_rows.size() == 0) {
        grad_rows = dx;
      } else {
        grad_rows += dx;
      }
      if (s > 0) grad_rows = unpool(grad_rows, batch, fb[s - 1].geo.in_h, fb[s - 1].geo.in_w);
    }
    return nn::rows_to_images(grad_rows, shape_);
  }

 private:
  struct ScaleFeatures {
    typename nn::Conv2d<Scalar>::Geometry geo;
    Mat<Scalar> preact;
    Mat<Scalar> normalized;
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> inv_norm;
  };

  void check_inputs(const Mat<Scalar>& a, const Mat<Scalar>& b) const {
    require(a.rows() == shape_.pixel_count() && b.rows() == shape_.pixel_count(), "training",
            "perceptual loss inputs must have shape " + shape_.str());
    require(a.cols() == b.cols(), "training", "perceptual loss batch sizes differ");
  }

  std::vector<ScaleFeatures> features(const Mat<Scalar>& pixels) const {
    const int batch = static_cast<int>(pixels.cols());
    Mat<Scalar> rows = nn::images_to_rows(Mat<Scalar>(pixels.array() - Scalar(0.5)), shape_);
    int h = shape_.height, w = shape_.width;
    std::vector<ScaleFeatures> out;
    for (std::size_t s = 0; s < convs_.size(); ++s) {
      if (s > 0) {
        rows = pool(rows, batch, h, w);
        h /= 2;
        w /= 2;
      }
      ScaleFeatures f;
      f.geo = convs_[s].geometry(batch, h, w);
      f.preact = convs_[s].forward(rows, f.geo);
      Mat<Scalar> act = f.preact;
      nn::leaky_relu_inplace(act, Scalar(0.2));
      f.inv_norm = (act.colwise().squaredNorm().array() + static_cast<Scalar>(config_.norm_eps)).rsqrt().transpose();
      f.normalized = act * f.inv_norm.asDiagonal();
      out.push_back(std::move(f));
    }
    return out;
  }

  static Mat<Scalar> pool(const Mat<Scalar>& x, int batch, int h, int w) {
    const int oh = h / 2, ow = w / 2;
    Mat<Scalar> out(x.rows(), static_cast<Eigen::Index>(batch) * oh * ow);
    for (int b = 0; b < batch; ++b)
      for (int y = 0; y < oh; ++y)
        for (int xx = 0; xx < ow; ++xx) {
          const Eigen::Index base = static_cast<Eigen::Index>(b) * h * w;
          out.col((static_cast<Eigen::Index>(b) * oh + y) * ow + xx) =
              Scalar(0.25) * (x.col(base + (2 * y) * w + 2 * xx) + x.col(base + (2 * y) * w + 2 * xx + 1) +
                              x.col(base + (2 * y + 1) * w + 2 * xx) + x.col(base + (2 * y + 1) * w + 2 * xx + 1));
        }
    return out;
  }

  /// Adjoint of pool; h, w are the pre-pooling sizes.
  static Mat<Scalar> unpool(const Mat<Scalar>& g, int batch, int h, int w) {
    const int oh = h / 2, ow = w / 2;
    Mat<Scalar> out = Mat<Scalar>::Zero(g.rows(), static_cast<Eigen::Index>(batch) * h * w);
    for (int b = 0; b < batch; ++b)
      for (int y = 0; y < oh; ++y)
        for (int xx = 0; xx < ow; ++xx) {
          const Eigen::Index base = static_cast<Eigen::Index>(b) * h * w;
          const auto q = Scalar(0.25) * g.col((static_cast<Eigen::Index>(b) * oh + y) * ow + xx);
          out.col(base + (2 * y) * w + 2 * xx) += q;
          out.col(base + (2 * y) * w + 2 * xx + 1) += q;
          out.col(base + (2 * y + 1) * w + 2 * xx) += q;
          out.col(base + (2 * y + 1) * w + 2 * xx + 1) += q;
        }
    return out;
  }

  ImageShape shape_;
  ToyPerceptualConfig config_;
  std::vector<nn::Conv2d<Scalar>> convs_;
  std::uint64_t checksum_ = 0;
};

}  // namespace latentbridge
