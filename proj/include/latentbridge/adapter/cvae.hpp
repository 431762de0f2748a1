#pragma once

#include <charconv>
#include <cmath>
#include <string>
#include <vector>

#include "latentbridge/core/config.hpp"
#include "latentbridge/embedding/embedding.hpp"
#include "latentbridge/generator/generator.hpp"
#include "latentbridge/nn/layers.hpp"

namespace latentbridge {

enum class EncoderMode { full, img_only, clip_only };

inline std::string to_string(EncoderMode m) {
  switch (m) {
    case EncoderMode::full: return "full";
    case EncoderMode::img_only: return "img_only";
    case EncoderMode::clip_only: return "clip_only";
  }
  return "full";
}

inline EncoderMode parse_encoder_mode(const std::string& s) {
  if (s == "full") return EncoderMode::full;
  if (s == "img_only") return EncoderMode::img_only;
  if (s == "clip_only") return EncoderMode::clip_only;
  throw ConfigError("adapter", "unknown encoder mode '" + s + "' (expected full, img_only or clip_only)");
}

struct AdapterConfig {
  ImageShape image{3, 32, 32};
  int context_dim = 512;
  int feature_dim = 512;  // conv-branch output e
  int latent_dim = 128;   // z
  int hidden_width = 512;
  int mlp_layers = 4;
  std::vector<int> conv_channels{32, 64, 128, 256, 512};
  double leaky_slope = 0.2;
  LatentShape offset{1, 64, LatentSpace::flat};
  EncoderMode encoder_mode = EncoderMode::full;
  bool variational = true;
  std::uint64_t seed = 1;

  static constexpr double kLogvarMin = -10.0;
  static constexpr double kLogvarMax = 10.0;

  static AdapterConfig from(const Config& c) {
    AdapterConfig a;
    a.image.channels = static_cast<int>(c.get_int("image.channels", a.image.channels));
    a.image.height = static_cast<int>(c.get_int("image.height", a.image.height));
    a.image.width = static_cast<int>(c.get_int("image.width", a.image.width));
    a.context_dim = static_cast<int>(c.get_int("embedding.dim", a.context_dim));
    a.feature_dim = static_cast<int>(c.get_int("model.feature_dim", a.feature_dim));
    a.latent_dim = static_cast<int>(c.get_int("model.latent_dim", a.latent_dim));
    a.hidden_width = static_cast<int>(c.get_int("model.hidden_width", a.hidden_width));
    a.mlp_layers = static_cast<int>(c.get_int("model.mlp_layers", a.mlp_layers));
    a.leaky_slope = c.get_double("model.leaky_slope", a.leaky_slope);
    a.offset.layers = static_cast<int>(c.get_int("generator.latent_layers", a.offset.layers));
    a.offset.width = static_cast<int>(c.get_int("generator.latent_dim", a.offset.width));
    a.offset.space = a.offset.layers > 1 ? LatentSpace::extended : LatentSpace::flat;
    a.encoder_mode = parse_encoder_mode(c.get_string("model.encoder_mode", "full"));
    a.variational = c.get_bool("model.variational", a.variational);
    a.seed = c.get_u64("model.seed", a.seed);
    const std::string widths = c.get_string("model.conv_channels", "");
    if (!widths.empty()) {
      a.conv_channels.clear();
      std::stringstream ss(widths);
      std::string item;
      while (std::getline(ss, item, ',')) {
        int width = 0;
        auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), width);
        if (ec != std::errc() || ptr != item.data() + item.size()) {
          throw ConfigError("adapter", "model.conv_channels expects comma-separated integers, got '" + widths + "'");
        }
        a.conv_channels.push_back(width);
      }
    }
    a.validate();
    return a;
  }

  void validate() const {
    require(context_dim > 0 && feature_dim > 0 && latent_dim > 0 && hidden_width > 0, "adapter",
            "adapter dimensions must be positive");
    require(mlp_layers >= 1, "adapter", "MLPs need at least one layer");
    require(!conv_channels.empty(), "adapter", "conv branch needs at least one layer");
    require(offset.size() > 0, "adapter", "offset dimension must be positive");
  }
};

/// Encoder posterior statistics and a sample.
template <typename Scalar>
struct LatentCode {
  Vec<Scalar> z;
  Vec<Scalar> mu;
  Vec<Scalar> logvar;
};

/// Conv branch: k stride-2 3x3 convolutions with leaky rectifiers, global
/// average pooling, then one fully connected layer.
template <typename Scalar>
class ConvBranch {
 public:
  struct Tape {
    std::vector<typename nn::Conv2d<Scalar>::Tape> convs;
    std::vector<Mat<Scalar>> preacts;
    Mat<Scalar> pooled;
    int final_plane = 1;
    int batch = 0;
  };

  ConvBranch() = default;
  ConvBranch(const AdapterConfig& cfg) : shape_(cfg.image), slope_(static_cast<Scalar>(cfg.leaky_slope)) {
    int in = cfg.image.channels;
    for (std::size_t i = 0; i < cfg.conv_channels.size(); ++i) {
      convs_.emplace_back("conv." + std::to_string(i), in, cfg.conv_channels[i], 3, 2, 1);
      in = cfg.conv_channels[i];
    }
    fc_ = nn::Linear<Scalar>("conv.fc", in, cfg.feature_dim);
  }

  void init(Rng& rng) {
    for (auto& c : convs_) c.init_kaiming(rng, static_cast<double>(slope_));
    fc_.init_kaiming(rng, static_cast<double>(slope_));
  }

  Mat<Scalar> forward(const Mat<Scalar>& pixels, Tape* tape = nullptr, bool check = false) const {
    require(pixels.rows() == shape_.pixel_count(), "adapter", "image does not have shape " + shape_.str());
    const int batch = static_cast<int>(pixels.cols());
    Mat<Scalar> h = nn::images_to_rows(pixels, shape_);
    int hh = shape_.height, ww = shape_.width;
    if (tape) {
      tape->convs.assign(convs_.size(), {});
      tape->preacts.assign(convs_.size(), {});
      tape->batch = batch;
    }
    for (std::size_t i = 0; i < convs_.size(); ++i) {
      auto geo = convs_[i].geometry(batch, hh, ww);
      Mat<Scalar> pre = convs_[i].forward(h, geo, tape ? &tape->convs[i] : nullptr);
      if (check) nn::check_finite(pre, convs_[i].weight.name);
      if (tape) tape->preacts[i] = pre;
      nn::leaky_relu_inplace(pre, slope_);
      h = std::move(pre);
      hh = geo.out_h;
      ww = geo.out_w;
    }
    const int plane = hh * ww;
    Mat<Scalar> pooled(h.rows(), batch);
    for (int b = 0; b < batch; ++b) pooled.col(b) = h.middleCols(static_cast<Eigen::Index>(b) * plane, plane).rowwise().mean();
    if (tape) {
      tape->pooled = pooled;
      tape->final_plane = plane;
    }
    Mat<Scalar> e = fc_.forward(pooled);
    if (check) nn::check_finite(e, fc_.weight.name);
    return e;
  }

  void backward(const Mat<Scalar>& de, const Tape& tape) {
    Mat<Scalar> dpooled = fc_.backward(tape.pooled, de);
    const int plane = tape.final_plane;
    Mat<Scalar> g(dpooled.rows(), static_cast<Eigen::Index>(tape.batch) * plane);
    for (int b = 0; b < tape.batch; ++b)
      g.middleCols(static_cast<Eigen::Index>(b) * plane, plane) = (dpooled.col(b) / Scalar(plane)).replicate(1, plane);
    for (std::size_t k = convs_.size(); k-- > 0;) {
      nn::leaky_relu_backward_inplace(g, tape.preacts[k], slope_);
      g = convs_[k].backward(g, tape.convs[k], k > 0);
    }
  }

  void collect(std::vector<nn::Parameter<Scalar>*>& out) {
    for (auto& c : convs_) {
      out.push_back(&c.weight);
      out.push_back(&c.bias);
    }
    out.push_back(&fc_.weight);
    out.push_back(&fc_.bias);
  }

 private:
  ImageShape shape_;
  Scalar slope_ = Scalar(0.2);
  std::vector<nn::Conv2d<Scalar>> convs_;
  nn::Linear<Scalar> fc_;
};

/// The conditional VAE interface between the embedder and the frozen
/// generator: q(z | x, c) via [ConvNet(x), c] -> MLP-E, and the latent offset
/// via [z, c] -> MLP-D. All batched methods take one sample per column.
template <typename Scalar>
class CvaeAdapter {
 public:
  struct Tape {
    typename ConvBranch<Scalar>::Tape conv;
    typename nn::Mlp<Scalar>::Tape enc;
    typename nn::Mlp<Scalar>::Tape dec;
    Mat<Scalar> raw_logvar;
    Mat<Scalar> mu, logvar, noise;
  };

  explicit CvaeAdapter(AdapterConfig config) : config_(std::move(config)) {
    config_.validate();
    conv_ = ConvBranch<Scalar>(config_);
    const auto slope = static_cast<Scalar>(config_.leaky_slope);
    std::vector<int> enc{config_.feature_dim + config_.context_dim};
    std::vector<int> dec{config_.latent_dim + config_.context_dim};
    for (int i = 0; i + 1 < config_.mlp_layers; ++i) {
      enc.push_back(config_.hidden_width);
      dec.push_back(config_.hidden_width);
    }
    enc.push_back(2 * config_.latent_dim);
    dec.push_back(config_.offset.size());
    mlp_e_ = nn::Mlp<Scalar>("mlp_e", enc, slope);
    mlp_d_ = nn::Mlp<Scalar>("mlp_d", dec, slope);

    Rng rng(derive_seed(config_.seed, 41));
    conv_.init(rng);
    mlp_e_.init(rng);
    mlp_d_.init(rng);
    // Training starts from x_hat = G(w_bar).
    auto& last = mlp_d_.layers().back();
    last.weight.value.setZero();
    last.bias.value.setZero();
  }

  const AdapterConfig& config() const { return config_; }
  int latent_dim() const { return config_.latent_dim; }
  int context_dim() const { return config_.context_dim; }

  std::vector<nn::Parameter<Scalar>*> parameters() {
    std::vector<nn::Parameter<Scalar>*> out;
    conv_.collect(out);
    for (auto& l : mlp_e_.layers()) {
      out.push_back(&l.weight);
      out.push_back(&l.bias);
    }
    for (auto& l : mlp_d_.layers()) {
      out.push_back(&l.weight);
      out.push_back(&l.bias);
    }
    return out;
  }

  std::vector<const nn::Parameter<Scalar>*> parameters() const {
    auto mut = const_cast<CvaeAdapter*>(this)->parameters();
    return {mut.begin(), mut.end()};
  }

  void zero_grad() {
    for (auto* p : parameters()) p->zero_grad();
  }

  /// Last MLP-D layer (zero at initialization).
  nn::Linear<Scalar>& decoder_head() { return mlp_d_.layers().back(); }

  void set_conv_trainable(bool trainable) {
    for (auto* p : parameters())
      if (p->name.rfind("conv.", 0) == 0) p->trainable = trainable;
  }

  /// (mu, logvar) for each column; logvar is clamped to [-10, 10].
  std::pair<Mat<Scalar>, Mat<Scalar>> encode_batch(const Mat<Scalar>& pixels, const Mat<Scalar>& contexts,
                                                   Tape* tape = nullptr) const {
    require(pixels.rows() == config_.image.pixel_count(), "adapter",
            "image does not have shape " + config_.image.str());
    require(contexts.rows() == config_.context_dim, "adapter",
            "context has dimension " + std::to_string(contexts.rows()) + ", expected " +
                std::to_string(config_.context_dim));
    require(pixels.cols() == contexts.cols(), "adapter", "image and context batch sizes differ");
    const auto batch = pixels.cols();
    const bool check = tape == nullptr;
    Mat<Scalar> input(config_.feature_dim + config_.context_dim, batch);
    if (config_.encoder_mode == EncoderMode::clip_only) {
      input.topRows(config_.feature_dim).setZero();
    } else {
      input.topRows(config_.feature_dim) = conv_.forward(pixels, tape ? &tape->conv : nullptr, check);
    }
    if (config_.encoder_mode == EncoderMode::img_only) {
      input.bottomRows(config_.context_dim).setZero();
    } else {
      input.bottomRows(config_.context_dim) = contexts;
    }
    Mat<Scalar> out = mlp_e_.forward(input, tape ? &tape->enc : nullptr, check);
    Mat<Scalar> mu = out.topRows(config_.latent_dim);
    Mat<Scalar> raw = out.bottomRows(config_.latent_dim);
    Mat<Scalar> logvar = raw.array()
                             .max(static_cast<Scalar>(AdapterConfig::kLogvarMin))
                             .min(static_cast<Scalar>(AdapterConfig::kLogvarMax));
    if (tape) tape->raw_logvar = std::move(raw);
    return {std::move(mu), std::move(logvar)};
  }

  /// z = mu + exp(logvar / 2) * noise
  static Mat<Scalar> reparameterize(const Mat<Scalar>& mu, const Mat<Scalar>& logvar, const Mat<Scalar>& noise) {
    require(mu.rows() == logvar.rows() && mu.cols() == logvar.cols() && mu.rows() == noise.rows() &&
                mu.cols() == noise.cols(),
            "adapter", "reparameterize shapes disagree");
    return mu.array() + (Scalar(0.5) * logvar.array()).exp() * noise.array();
  }

  Mat<Scalar> decode_batch(const Mat<Scalar>& z, const Mat<Scalar>& contexts, Tape* tape = nullptr) const {
    require(z.rows() == config_.latent_dim, "adapter",
            "latent has dimension " + std::to_string(z.rows()) + ", expected " + std::to_string(config_.latent_dim));
    require(contexts.rows() == config_.context_dim, "adapter",
            "context has dimension " + std::to_string(contexts.rows()) + ", expected " +
                std::to_string(config_.context_dim));
    require(z.cols() == contexts.cols(), "adapter", "latent and context batch sizes differ");
    Mat<Scalar> input(config_.latent_dim + config_.context_dim, z.cols());
    input << z, contexts;
    return mlp_d_.forward(input, tape ? &tape->dec : nullptr, tape == nullptr);
  }

  // Single-sample conveniences.

  std::pair<Vec<Scalar>, Vec<Scalar>> encode(const BasicImage<Scalar>& image, const BasicEmbedding<Scalar>& context) const {
    require(image.shape == config_.image, "adapter", "image does not have shape " + config_.image.str());
    auto [mu, logvar] = encode_batch(image.pixels, context.values);
    return {Vec<Scalar>(mu.col(0)), Vec<Scalar>(logvar.col(0))};
  }

  GeneratorLatent<Scalar> decode(const Vec<Scalar>& z, const BasicEmbedding<Scalar>& context) const {
    return {config_.offset, Vec<Scalar>(decode_batch(z, context.values).col(0))};
  }

  struct TrainForward {
    Mat<Scalar> reconstruction;  // x_hat, one image per column
    Mat<Scalar> mu, logvar, z, offset, latents;
  };

  /// x_hat = G(w_bar + MLP-D([z, c])) with z from the encoder posterior.
  /// Exactly one generator forward per sample.
  TrainForward forward_train(const Mat<Scalar>& pixels, const Mat<Scalar>& contexts, const Mat<Scalar>& noise,
                             const GeneratorBackend<Scalar>& generator, Tape* tape = nullptr) const {
    require(generator.latent_shape() == config_.offset, "adapter", "generator latent shape does not match the adapter");
    TrainForward f;
    std::tie(f.mu, f.logvar) = encode_batch(pixels, contexts, tape);
    f.z = config_.variational ? reparameterize(f.mu, f.logvar, noise) : f.mu;
    f.offset = decode_batch(f.z, contexts, tape);
    f.latents = f.offset.colwise() + generator.mean_latent().values;
    f.reconstruction = generator.generate_batch(f.latents);
    if (tape) {
      tape->mu = f.mu;
      tape->logvar = f.logvar;
      tape->noise = noise;
    }
    return f;
  }

  /// Backpropagates d(loss)/d(offset) through MLP-D; returns d(loss)/dz.
  Mat<Scalar> decode_backward(const Mat<Scalar>& d_offset, const Tape& tape) {
    Mat<Scalar> d_input = mlp_d_.backward(d_offset, tape.dec, true);
    return d_input.topRows(config_.latent_dim);
  }

  /// Backpropagates posterior-statistic gradients through MLP-E and the conv
  /// branch. d_logvar is w.r.t. the clamped logvar.
  void encode_backward(const Mat<Scalar>& d_mu, const Mat<Scalar>& d_logvar, const Tape& tape) {
    Mat<Scalar> d_out(2 * config_.latent_dim, d_mu.cols());
    const auto lo = static_cast<Scalar>(AdapterConfig::kLogvarMin);
    const auto hi = static_cast<Scalar>(AdapterConfig::kLogvarMax);
    d_out.topRows(config_.latent_dim) = d_mu;
    d_out.bottomRows(config_.latent_dim) =
        ((tape.raw_logvar.array() > lo) && (tape.raw_logvar.array() < hi)).select(d_logvar, Scalar(0));
    const bool need_conv = config_.encoder_mode != EncoderMode::clip_only;
    Mat<Scalar> d_input = mlp_e_.backward(d_out, tape.enc, need_conv);
    if (need_conv) conv_.backward(d_input.topRows(config_.feature_dim), tape.conv);
  }

 private:
  AdapterConfig config_;
  ConvBranch<Scalar> conv_;
  nn::Mlp<Scalar> mlp_e_;
  nn::Mlp<Scalar> mlp_d_;
};

}  // namespace latentbridge
