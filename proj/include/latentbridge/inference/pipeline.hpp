#pragma once

#include <memory>
#include <string>

#include "latentbridge/adapter/cvae.hpp"
#include "latentbridge/backends.hpp"
#include "latentbridge/prior/nonparam_prior.hpp"

namespace latentbridge {

enum class GenerationMode { full, pt, img };

inline std::string to_string(GenerationMode m) {
  switch (m) {
    case GenerationMode::full: return "full";
    case GenerationMode::pt: return "pt";
    case GenerationMode::img: return "img";
  }
  return "full";
}

inline GenerationMode parse_generation_mode(const std::string& s) {
  if (s == "full") return GenerationMode::full;
  if (s == "pt") return GenerationMode::pt;
  if (s == "img") return GenerationMode::img;
  throw InputError("inference", "unknown mode '" + s + "' (expected full, pt or img)");
}

/// Decoder context used by image-guided generation.
enum class GuidedContext { text_prior, text, guidance_image };

inline GuidedContext parse_guided_context(const std::string& s) {
  if (s == "text_prior") return GuidedContext::text_prior;
  if (s == "text") return GuidedContext::text;
  if (s == "guidance_image") return GuidedContext::guidance_image;
  throw ConfigError("inference", "unknown guided context '" + s + "'");
}

struct InferenceOptions {
  PriorConfig prior;
  double truncation = 1.0;  // scales z draws; 1.0 means no truncation
  GuidedContext guided_context = GuidedContext::text_prior;

  static InferenceOptions from(const Config& c) {
    InferenceOptions o;
    o.prior = PriorConfig::from(c);
    o.truncation = c.get_double("inference.truncation", o.truncation);
    o.guided_context = parse_guided_context(c.get_string("inference.guided_context", "text_prior"));
    return o;
  }
};

struct GeneratedBatch {
  ImageBatch<float> images;
  Mat<float> contexts;  // decoder context per image
  Mat<float> latents;   // z per image
};

/// Text-conditioned generation over a trained adapter. Every mode costs
/// exactly one generator forward per image.
class Pipeline {
 public:
  Pipeline(std::shared_ptr<const CvaeAdapter<float>> adapter, Backends<float> backends,
           std::shared_ptr<const EmbeddingBank> bank = nullptr, InferenceOptions options = {})
      : adapter_(std::move(adapter)), backends_(std::move(backends)), bank_(std::move(bank)), options_(options) {
    require(adapter_ != nullptr, "inference", "pipeline needs an adapter");
    if (backends_.embedder->dim() != adapter_->context_dim()) {
      throw ConfigError("inference", "embedder dimension does not match the adapter context dimension");
    }
    if (!(backends_.generator->latent_shape() == adapter_->config().offset)) {
      throw ConfigError("inference", "generator latent shape does not match the adapter");
    }
    if (bank_ && bank_->dim() != backends_.embedder->dim()) {
      throw ConfigError("inference", "bank dimension does not match the embedder");
    }
  }

  const CvaeAdapter<float>& adapter() const { return *adapter_; }
  const Backends<float>& backends() const { return backends_; }
  const EmbeddingBank* bank() const { return bank_.get(); }
  const InferenceOptions& options() const { return options_; }

  /// z ~ N(0, I) scaled by the truncation factor. A non-variational adapter
  /// has no latent distribution, so its z is fixed at the prior mean.
  Mat<float> draw_latents(int n, Rng& rng) const {
    if (!adapter_->config().variational) return Mat<float>::Zero(adapter_->latent_dim(), n);
    return standard_normal<float>(rng, adapter_->latent_dim(), n) * static_cast<float>(options_.truncation);
  }

  /// G(w_bar + MLP-D([z, c])) per column.
  ImageBatch<float> render(const Mat<float>& latents, const Mat<float>& contexts) const {
    Mat<float> offset = adapter_->decode_batch(latents, contexts);
    Mat<float> w = offset.colwise() + backends_.generator->mean_latent().values;
    return {backends_.generator->image_shape(), backends_.generator->generate_batch(w)};
  }

  /// Non-parametric prior context + Gaussian z. One bank lookup per prompt,
  /// fresh subset and Dirichlet weights per image. Prior draws come from a
  /// stream keyed by the caller's rng and the prior seed.
  GeneratedBatch generate_full(const std::string& text, int n, const PriorConfig& prior, Rng& rng) const {
    require(n >= 1, "inference", "n must be positive");
    Mat<float> contexts = prior_contexts(text, n, prior, rng);
    Mat<float> z = draw_latents(n, rng);
    return {render(z, contexts), contexts, z};
  }

  GeneratedBatch generate_full(const std::string& text, int n, Rng& rng) const {
    return generate_full(text, n, options_.prior, rng);
  }

  /// Text embedding passed straight to the decoder; only z varies.
  GeneratedBatch generate_pt(const std::string& text, int n, Rng& rng) const {
    require(n >= 1, "inference", "n must be positive");
    Mat<float> z = draw_latents(n, rng);
    return generate_pt_with_latents(text, z);
  }

  GeneratedBatch generate_pt_with_latents(const std::string& text, const Mat<float>& z) const {
    const auto t = backends_.embedder->embed_text(text);
    Mat<float> contexts = t.values.replicate(1, z.cols());
    return {render(z, contexts), contexts, z};
  }

  /// z from the encoder posterior of the guidance image (conditioned on the
  /// guidance image's own embedding); decoder context per options.
  GeneratedBatch generate_img_guided(const std::string& text, const Image& guidance, int n, Rng& rng) const {
    require(n >= 1, "inference", "n must be positive");
    require(guidance.shape == adapter_->config().image, "inference", "guidance image has the wrong shape");
    const Mat<float> g_ctx = backends_.embedder->embed_images(guidance.pixels);
    auto [mu, logvar] = adapter_->encode_batch(guidance.pixels, g_ctx);
    Mat<float> z(adapter_->latent_dim(), n);
    for (int j = 0; j < n; ++j) {
      if (adapter_->config().variational) {
        Mat<float> eps = standard_normal<float>(rng, adapter_->latent_dim(), 1);
        z.col(j) = CvaeAdapter<float>::reparameterize(mu, logvar, eps);
      } else {
        z.col(j) = mu;
      }
    }
    Mat<float> contexts;
    switch (options_.guided_context) {
      case GuidedContext::text_prior: contexts = prior_contexts(text, n, options_.prior, rng); break;
      case GuidedContext::text: contexts = backends_.embedder->embed_text(text).values.replicate(1, n); break;
      case GuidedContext::guidance_image: contexts = g_ctx.replicate(1, n); break;
    }
    return {render(z, contexts), contexts, z};
  }

  GeneratedBatch generate(GenerationMode mode, const std::string& text, int n, Rng& rng,
                          const Image* guidance = nullptr) const {
    switch (mode) {
      case GenerationMode::full: return generate_full(text, n, rng);
      case GenerationMode::pt: return generate_pt(text, n, rng);
      case GenerationMode::img:
        if (!guidance) throw ConfigError("inference", "image-guided mode needs a guidance image");
        return generate_img_guided(text, *guidance, n, rng);
    }
    throw InputError("inference", "unknown mode");
  }

 private:
  Mat<float> prior_contexts(const std::string& text, int n, const PriorConfig& prior, Rng& rng) const {
    if (!bank_) throw ConfigError("inference", "the non-parametric prior needs an embedding bank");
    prior.validate(bank_->size());
    const auto t = backends_.embedder->embed_text(text);
    const auto neighbors = top_k(*bank_, t.values, prior.k);
    Rng prior_rng(derive_seed(rng(), prior.seed));
    Mat<float> contexts(bank_->dim(), n);
    for (int j = 0; j < n; ++j) contexts.col(j) = sample_from_neighbors(*bank_, neighbors, prior, prior_rng).context.values;
    return contexts;
  }

  std::shared_ptr<const CvaeAdapter<float>> adapter_;
  Backends<float> backends_;
  std::shared_ptr<const EmbeddingBank> bank_;
  InferenceOptions options_;
};

}  // namespace latentbridge
