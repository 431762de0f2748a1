#include "support.hpp"

using namespace latentbridge;
using namespace latentbridge::nn;

namespace {

// Direct convolution on channels x (batch*h*w) activations, weight layout
// (out, ky, kx, in).
Mat<double> naive_conv(const Conv2d<double>& conv, const Mat<double>& x, int batch, int h, int w, int k, int stride,
                       int pad) {
  const int oh = (h + 2 * pad - k) / stride + 1;
  const int ow = (w + 2 * pad - k) / stride + 1;
  const int cin = conv.in_channels();
  Mat<double> y(conv.out_channels(), batch * oh * ow);
  for (int o = 0; o < conv.out_channels(); ++o)
    for (int b = 0; b < batch; ++b)
      for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox) {
          double acc = conv.bias.value(o, 0);
          for (int ky = 0; ky < k; ++ky)
            for (int kx = 0; kx < k; ++kx)
              for (int c = 0; c < cin; ++c) {
                const int iy = oy * stride - pad + ky, ix = ox * stride - pad + kx;
                if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
                acc += conv.weight.value(o, (ky * k + kx) * cin + c) * x(c, (b * h + iy) * w + ix);
              }
          y(o, (b * oh + oy) * ow + ox) = acc;
        }
  return y;
}

}  // namespace

TEST(LeakyRelu, ForwardAndBackward) {
  Mat<double> x(1, 4);
  x << -2, -0.5, 0.5, 3;
  Mat<double> pre = x;
  leaky_relu_inplace(x, 0.2);
  EXPECT_DOUBLE_EQ(x(0, 0), -0.4);
  EXPECT_DOUBLE_EQ(x(0, 3), 3.0);
  Mat<double> dy = Mat<double>::Ones(1, 4);
  leaky_relu_backward_inplace(dy, pre, 0.2);
  EXPECT_DOUBLE_EQ(dy(0, 0), 0.2);
  EXPECT_DOUBLE_EQ(dy(0, 2), 1.0);
}

TEST(CheckFinite, NamesTheLayer) {
  Mat<float> m = Mat<float>::Zero(2, 2);
  m(1, 1) = std::numeric_limits<float>::quiet_NaN();
  try {
    check_finite(m, "mlp_e.2.weight");
    FAIL();
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("mlp_e.2.weight"), std::string::npos);
  }
}

TEST(Conv2d, MatchesDirectConvolution) {
  Rng rng(1);
  for (auto [stride, pad] : {std::pair{1, 1}, std::pair{2, 1}, std::pair{2, 0}}) {
    Conv2d<double> conv("c", 3, 5, 3, stride, pad);
    conv.init_kaiming(rng, 0.2);
    conv.bias.value = standard_normal<double>(rng, 5, 1);
    const int batch = 2, h = 7, w = 6;
    Mat<double> x = standard_normal<double>(rng, 3, batch * h * w);
    Mat<double> y = conv.forward(x, conv.geometry(batch, h, w));
    Mat<double> ref = naive_conv(conv, x, batch, h, w, 3, stride, pad);
    ASSERT_EQ(y.cols(), ref.cols());
    EXPECT_LT((y - ref).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Conv2d, GradientsMatchFiniteDifferences) {
  Rng rng(2);
  Conv2d<double> conv("c", 2, 3, 3, 2, 1);
  conv.init_kaiming(rng, 0.2);
  const auto geo = conv.geometry(2, 5, 5);
  Mat<double> x = standard_normal<double>(rng, 2, 2 * 25);
  Mat<double> g = standard_normal<double>(rng, 3, 2 * geo.out_h * geo.out_w);
  Conv2d<double>::Tape tape;
  conv.forward(x, geo, &tape);
  conv.weight.grad.setZero();
  conv.bias.grad.setZero();
  Mat<double> dx = conv.backward(g, tape);
  auto f = [&] { return (conv.forward(x, geo).array() * g.array()).sum(); };
  for (int i = 0; i < conv.weight.value.size(); ++i) {
    const double n = lbtest::central_difference(f, conv.weight.value.data()[i], 1e-6);
    EXPECT_LT(lbtest::relative_error(conv.weight.grad.data()[i], n), 1e-6);
  }
  for (int i = 0; i < 3; ++i) {
    const double n = lbtest::central_difference(f, conv.bias.value(i, 0), 1e-6);
    EXPECT_LT(lbtest::relative_error(conv.bias.grad(i, 0), n), 1e-6);
  }
  for (int i = 0; i < x.size(); i += 7) {
    const double n = lbtest::central_difference(f, x.data()[i], 1e-6);
    EXPECT_LT(lbtest::relative_error(dx.data()[i], n), 1e-6);
  }
  EXPECT_LT((conv.input_grad(g, geo) - dx).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Mlp, GradientsMatchFiniteDifferences) {
  Rng rng(3);
  Mlp<double> mlp("m", {5, 7, 6, 3}, 0.2);
  mlp.init(rng);
  for (auto& l : mlp.layers()) l.bias.value = standard_normal<double>(rng, l.out_features(), 1) * 0.1;
  Mat<double> x = standard_normal<double>(rng, 5, 4);
  Mat<double> g = standard_normal<double>(rng, 3, 4);
  Mlp<double>::Tape tape;
  mlp.forward(x, &tape);
  for (auto& l : mlp.layers()) {
    l.weight.grad.setZero();
    l.bias.grad.setZero();
  }
  Mat<double> dx = mlp.backward(g, tape);
  auto f = [&] { return (mlp.forward(x).array() * g.array()).sum(); };
  for (auto& l : mlp.layers())
    for (int i = 0; i < l.weight.value.size(); ++i) {
      const double n = lbtest::central_difference(f, l.weight.value.data()[i], 1e-6);
      EXPECT_LT(lbtest::relative_error(l.weight.grad.data()[i], n), 1e-6) << l.weight.name;
    }
  for (int i = 0; i < x.size(); ++i) {
    const double n = lbtest::central_difference(f, x.data()[i], 1e-6);
    EXPECT_LT(lbtest::relative_error(dx.data()[i], n), 1e-6);
  }
}

TEST(Mlp, RejectsWrongInputWidth) {
  Mlp<float> mlp("m", {4, 3}, 0.2f);
  EXPECT_THROW(mlp.forward(Mat<float>::Zero(5, 1)), InputError);
}

TEST(ImageRows, RoundTrip) {
  Rng rng(4);
  ImageShape s{3, 4, 5};
  Mat<float> px = standard_normal<float>(rng, s.pixel_count(), 3);
  Mat<float> rows = images_to_rows(px, s);
  EXPECT_EQ(rows.rows(), 3);
  EXPECT_EQ(rows.cols(), 3 * 20);
  EXPECT_FLOAT_EQ(rows(2, 1 * 20 + 7), px(2 * 20 + 7, 1));
  EXPECT_EQ(rows_to_images(rows, s), px);
}

TEST(Adam, FirstStepMovesEachWeightByLearningRate) {
  Parameter<double> p("p", {3}, 3, 1);
  p.value << 1, 2, 3;
  p.grad << 0.5, -4, 1e-3;
  Adam<double> opt(0.01);
  opt.step({&p});
  // With bias correction the first step is lr * g / (|g| + eps).
  EXPECT_NEAR(p.value(0, 0), 1 - 0.01, 1e-9);
  EXPECT_NEAR(p.value(1, 0), 2 + 0.01, 1e-9);
  EXPECT_NEAR(p.value(2, 0), 3 - 0.01 * 1e-3 / (1e-3 + 1e-8), 1e-9);
  EXPECT_EQ(opt.steps(), 1);
}

TEST(Adam, MatchesReferenceRecurrence) {
  Parameter<double> p("p", {1}, 1, 1);
  p.value(0, 0) = 0.3;
  Adam<double> opt(0.05);
  double m = 0, v = 0, x = 0.3;
  const double grads[] = {0.2, -0.1, 0.4, 0.05, -0.3};
  for (int t = 1; t <= 5; ++t) {
    const double g = grads[t - 1];
    p.grad(0, 0) = g;
    opt.step({&p});
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    const double mh = m / (1 - std::pow(0.9, t)), vh = v / (1 - std::pow(0.999, t));
    x -= 0.05 * mh / (std::sqrt(vh) + 1e-8);
    EXPECT_NEAR(p.value(0, 0), x, 1e-9);
  }
}

TEST(Adam, SkipsFrozenParameters) {
  Parameter<float> a("a", {1}, 1, 1), b("b", {1}, 1, 1);
  a.grad(0, 0) = b.grad(0, 0) = 1.0f;
  b.trainable = false;
  Adam<float> opt(0.1);
  opt.step({&a, &b});
  EXPECT_LT(a.value(0, 0), 0.0f);
  EXPECT_EQ(b.value(0, 0), 0.0f);
  EXPECT_THROW(Adam<float>(0.0), InputError);
}
