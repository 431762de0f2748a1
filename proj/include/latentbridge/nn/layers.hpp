#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "latentbridge/core/random.hpp"
#include "latentbridge/core/tensor.hpp"

namespace latentbridge::nn {

template <typename Scalar>
struct Parameter {
  std::string name;
  std::vector<int> shape;  // logical shape, as persisted in checkpoints
  Mat<Scalar> value;
  Mat<Scalar> grad;
  bool trainable = true;

  Parameter() = default;
  Parameter(std::string n, std::vector<int> s, Eigen::Index rows, Eigen::Index cols)
      : name(std::move(n)), shape(std::move(s)), value(Mat<Scalar>::Zero(rows, cols)), grad(Mat<Scalar>::Zero(rows, cols)) {}

  void zero_grad() { grad.setZero(); }
};

template <typename Scalar>
void leaky_relu_inplace(Mat<Scalar>& x, Scalar slope) {
  x = x.array().max(slope * x.array());
}

/// dy *= leaky'(pre)
template <typename Scalar>
void leaky_relu_backward_inplace(Mat<Scalar>& dy, const Mat<Scalar>& pre, Scalar slope) {
  dy = (pre.array() > Scalar(0)).select(dy, slope * dy.array()).matrix();
}

template <typename Scalar>
void check_finite(const Mat<Scalar>& m, const std::string& layer) {
  if (!m.allFinite()) throw NumericError("adapter", "non-finite activations in layer " + layer);
}

/// Fully connected layer, y = W x + b, one sample per column.
template <typename Scalar>
class Linear {
 public:
  Linear() = default;
  Linear(const std::string& name, int in, int out)
      : weight(name + ".weight", {out, in}, out, in), bias(name + ".bias", {out}, out, 1) {}

  int in_features() const { return static_cast<int>(weight.value.cols()); }
  int out_features() const { return static_cast<int>(weight.value.rows()); }

  void init_kaiming(Rng& rng, double slope) {
    const double bound = std::sqrt(6.0 / ((1.0 + slope * slope) * in_features()));
    weight.value = uniform<Scalar>(rng, weight.value.rows(), weight.value.cols(), -bound, bound);
    bias.value.setZero();
  }

  Mat<Scalar> forward(const Mat<Scalar>& x) const {
    require(x.rows() == in_features(), "adapter",
            weight.name + " expects " + std::to_string(in_features()) + " inputs, got " + std::to_string(x.rows()));
    Mat<Scalar> y = weight.value * x;
    y.colwise() += bias.value.col(0);
    return y;
  }

  /// Accumulates parameter gradients; returns dL/dx when requested.
  Mat<Scalar> backward(const Mat<Scalar>& x, const Mat<Scalar>& dy, bool need_input_grad = true) {
    weight.grad.noalias() += dy * x.transpose();
    bias.grad.col(0).noalias() += dy.rowwise().sum();
    if (!need_input_grad) return {};
    return weight.value.transpose() * dy;
  }

  Parameter<Scalar> weight;
  Parameter<Scalar> bias;
};

/// Stack of Linear layers with leaky rectifiers between them (none after the last).
template <typename Scalar>
class Mlp {
 public:
  struct Tape {
    std::vector<Mat<Scalar>> inputs;
    std::vector<Mat<Scalar>> preacts;
  };

  Mlp() = default;
  Mlp(const std::string& name, std::vector<int> widths, Scalar slope) : slope_(slope) {
    require(widths.size() >= 2, "adapter", "an MLP needs at least one layer");
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
      layers_.emplace_back(name + "." + std::to_string(i), widths[i], widths[i + 1]);
    }
  }

  void init(Rng& rng) {
    for (auto& l : layers_) l.init_kaiming(rng, static_cast<double>(slope_));
  }

  Mat<Scalar> forward(const Mat<Scalar>& x, Tape* tape = nullptr, bool check = false) const {
    if (tape) {
      tape->inputs.clear();
      tape->preacts.clear();
    }
    Mat<Scalar> h = x;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      if (tape) tape->inputs.push_back(h);
      Mat<Scalar> pre = layers_[i].forward(h);
      if (check) check_finite(pre, layers_[i].weight.name);
      if (i + 1 == layers_.size()) return pre;
      if (tape) tape->preacts.push_back(pre);
      leaky_relu_inplace(pre, slope_);
      h = std::move(pre);
    }
    return h;
  }

  Mat<Scalar> backward(const Mat<Scalar>& dy, const Tape& tape, bool need_input_grad = true) {
    Mat<Scalar> g = dy;
    for (std::size_t k = layers_.size(); k-- > 0;) {
      if (k + 1 < layers_.size()) leaky_relu_backward_inplace(g, tape.preacts[k], slope_);
      g = layers_[k].backward(tape.inputs[k], g, k > 0 || need_input_grad);
    }
    return g;
  }

  std::vector<Linear<Scalar>>& layers() { return layers_; }
  const std::vector<Linear<Scalar>>& layers() const { return layers_; }

 private:
  std::vector<Linear<Scalar>> layers_;
  Scalar slope_ = Scalar(0.2);
};

/// Square-kernel 2-D convolution on channel-row activations:
/// an activation is channels x (batch * height * width), columns ordered
/// (sample, y, x). Implemented as im2col followed by one GEMM.
template <typename Scalar>
class Conv2d {
 public:
  struct Geometry {
    int batch = 0, in_h = 0, in_w = 0, out_h = 0, out_w = 0;
  };
  struct Tape {
    Geometry geo;
    Mat<Scalar> cols;
  };

  Conv2d() = default;
  Conv2d(const std::string& name, int in_channels, int out_channels, int kernel, int stride, int padding)
      : weight(name + ".weight", {out_channels, kernel, kernel, in_channels}, out_channels,
               static_cast<Eigen::Index>(kernel) * kernel * in_channels),
        bias(name + ".bias", {out_channels}, out_channels, 1),
        in_channels_(in_channels),
        kernel_(kernel),
        stride_(stride),
        padding_(padding) {}

  int in_channels() const { return in_channels_; }
  int out_channels() const { return static_cast<int>(weight.value.rows()); }

  Geometry geometry(int batch, int in_h, int in_w) const {
    Geometry g;
    g.batch = batch;
    g.in_h = in_h;
    g.in_w = in_w;
    g.out_h = (in_h + 2 * padding_ - kernel_) / stride_ + 1;
    g.out_w = (in_w + 2 * padding_ - kernel_) / stride_ + 1;
    return g;
  }

  void init_kaiming(Rng& rng, double slope) {
    const double fan_in = static_cast<double>(weight.value.cols());
    const double bound = std::sqrt(6.0 / ((1.0 + slope * slope) * fan_in));
    weight.value = uniform<Scalar>(rng, weight.value.rows(), weight.value.cols(), -bound, bound);
    bias.value.setZero();
  }

  Mat<Scalar> forward(const Mat<Scalar>& x, const Geometry& geo, Tape* tape = nullptr) const {
    require(x.rows() == in_channels_ && x.cols() == static_cast<Eigen::Index>(geo.batch) * geo.in_h * geo.in_w,
            "adapter", weight.name + " received an activation of the wrong shape");
    Mat<Scalar> cols = im2col(x, geo);
    Mat<Scalar> y = weight.value * cols;
    y.colwise() += bias.value.col(0);
    if (tape) {
      tape->geo = geo;
      tape->cols = std::move(cols);
    }
    return y;
  }

  Mat<Scalar> backward(const Mat<Scalar>& dy, const Tape& tape, bool need_input_grad = true) {
    weight.grad.noalias() += dy * tape.cols.transpose();
    bias.grad.col(0).noalias() += dy.rowwise().sum();
    if (!need_input_grad) return {};
    return col2im(weight.value.transpose() * dy, tape.geo);
  }

  /// Input gradient only (for frozen feature extractors).
  Mat<Scalar> input_grad(const Mat<Scalar>& dy, const Geometry& geo) const {
    return col2im(weight.value.transpose() * dy, geo);
  }

  Parameter<Scalar> weight;
  Parameter<Scalar> bias;

 private:
  // Row index of the unfolded matrix is (ky * k + kx) * C + c.
  Mat<Scalar> im2col(const Mat<Scalar>& x, const Geometry& g) const {
    const int c_in = in_channels_;
    const Eigen::Index rows = static_cast<Eigen::Index>(kernel_) * kernel_ * c_in;
    Mat<Scalar> cols = Mat<Scalar>::Zero(rows, static_cast<Eigen::Index>(g.batch) * g.out_h * g.out_w);
    const Scalar* src = x.data();
    Scalar* dst = cols.data();
    for (int b = 0; b < g.batch; ++b) {
      for (int oy = 0; oy < g.out_h; ++oy) {
        for (int ox = 0; ox < g.out_w; ++ox) {
          Scalar* out = dst + ((static_cast<Eigen::Index>(b) * g.out_h + oy) * g.out_w + ox) * rows;
          for (int ky = 0; ky < kernel_; ++ky) {
            const int iy = oy * stride_ - padding_ + ky;
            if (iy < 0 || iy >= g.in_h) continue;
            for (int kx = 0; kx < kernel_; ++kx) {
              const int ix = ox * stride_ - padding_ + kx;
              if (ix < 0 || ix >= g.in_w) continue;
              const Scalar* in = src + ((static_cast<Eigen::Index>(b) * g.in_h + iy) * g.in_w + ix) * c_in;
              std::copy(in, in + c_in, out + (ky * kernel_ + kx) * c_in);
            }
          }
        }
      }
    }
    return cols;
  }

  Mat<Scalar> col2im(const Mat<Scalar>& cols, const Geometry& g) const {
    const int c_in = in_channels_;
    const Eigen::Index rows = cols.rows();
    Mat<Scalar> x = Mat<Scalar>::Zero(c_in, static_cast<Eigen::Index>(g.batch) * g.in_h * g.in_w);
    const Scalar* src = cols.data();
    Scalar* dst = x.data();
    for (int b = 0; b < g.batch; ++b) {
      for (int oy = 0; oy < g.out_h; ++oy) {
        for (int ox = 0; ox < g.out_w; ++ox) {
          const Scalar* in = src + ((static_cast<Eigen::Index>(b) * g.out_h + oy) * g.out_w + ox) * rows;
          for (int ky = 0; ky < kernel_; ++ky) {
            const int iy = oy * stride_ - padding_ + ky;
            if (iy < 0 || iy >= g.in_h) continue;
            for (int kx = 0; kx < kernel_; ++kx) {
              const int ix = ox * stride_ - padding_ + kx;
              if (ix < 0 || ix >= g.in_w) continue;
              Scalar* out = dst + ((static_cast<Eigen::Index>(b) * g.in_h + iy) * g.in_w + ix) * c_in;
              const Scalar* k = in + (ky * kernel_ + kx) * c_in;
              for (int c = 0; c < c_in; ++c) out[c] += k[c];
            }
          }
        }
      }
    }
    return x;
  }

  int in_channels_ = 0;
  int kernel_ = 3;
  int stride_ = 1;
  int padding_ = 1;
};

/// Channel-planar image columns (pixels x batch) -> channels x (batch*h*w).
template <typename Scalar>
Mat<Scalar> images_to_rows(const Mat<Scalar>& pixels, const ImageShape& s) {
  const Eigen::Index plane = s.plane();
  Mat<Scalar> out(s.channels, pixels.cols() * plane);
  for (Eigen::Index b = 0; b < pixels.cols(); ++b)
    for (int c = 0; c < s.channels; ++c)
      out.row(c).segment(b * plane, plane) = pixels.col(b).segment(c * plane, plane).transpose();
  return out;
}

template <typename Scalar>
Mat<Scalar> rows_to_images(const Mat<Scalar>& rows, const ImageShape& s) {
  const Eigen::Index plane = s.plane();
  const Eigen::Index batch = rows.cols() / plane;
  Mat<Scalar> out(s.pixel_count(), batch);
  for (Eigen::Index b = 0; b < batch; ++b)
    for (int c = 0; c < s.channels; ++c)
      out.col(b).segment(c * plane, plane) = rows.row(c).segment(b * plane, plane).transpose();
  return out;
}

/// Adaptive moment estimation with the usual defaults (0.9, 0.999, 1e-8).
template <typename Scalar>
class Adam {
 public:
  explicit Adam(double learning_rate, double beta1 = 0.9, double beta2 = 0.999, double epsilon = 1e-8)
      : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(epsilon) {
    require(learning_rate > 0.0, "training", "learning rate must be positive");
  }

  void step(const std::vector<Parameter<Scalar>*>& params) {
    if (first_.empty()) {
      for (auto* p : params) {
        first_.push_back(Mat<Scalar>::Zero(p->value.rows(), p->value.cols()));
        second_.push_back(Mat<Scalar>::Zero(p->value.rows(), p->value.cols()));
      }
    }
    require(first_.size() == params.size(), "training", "optimizer parameter list changed between steps");
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    const Scalar step = static_cast<Scalar>(lr_ * std::sqrt(c2) / c1);
    const Scalar eps_hat = static_cast<Scalar>(eps_ * std::sqrt(c2));
    const Scalar b1 = static_cast<Scalar>(beta1_), b2 = static_cast<Scalar>(beta2_);
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto* p = params[i];
      if (!p->trainable) continue;
      first_[i] = b1 * first_[i] + (Scalar(1) - b1) * p->grad;
      second_[i] = b2 * second_[i] + (Scalar(1) - b2) * p->grad.cwiseAbs2();
      p->value.array() -= step * first_[i].array() / (second_[i].array().sqrt() + eps_hat);
    }
  }

  long steps() const { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<Mat<Scalar>> first_;
  std::vector<Mat<Scalar>> second_;
};

}  // namespace latentbridge::nn
