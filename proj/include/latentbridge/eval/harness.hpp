#pragma once

#include <memory>
#include <string>
#include <vector>

#include "latentbridge/eval/metrics.hpp"
#include "latentbridge/inference/pipeline.hpp"
#include "latentbridge/training/trainer.hpp"

namespace latentbridge {

/// Everything a toy experiment needs besides the model: training images, the
/// bank built from them, and held-out negatives and guidance images.
struct ToyBenchmark {
  ImageBatch<float> train_images;
  std::shared_ptr<const EmbeddingBank> bank;
  Mat<float> negative_embeddings;
  ImageBatch<float> guidance_images;
  Mat<float> guidance_factors;
};

inline ToyBenchmark make_toy_benchmark(const Backends<float>& backends, int train_count = 2000,
                                       int negative_count = 1000, int guidance_count = 200, std::uint64_t seed = 0) {
  require(backends.world != nullptr, "evaluation", "toy benchmark needs toy backends");
  ToyBenchmark b;
  Rng rng(derive_seed(seed, 81));
  b.train_images = backends.world->sample_batch(rng, train_count);
  std::vector<std::string> ids;
  for (int i = 0; i < train_count; ++i) ids.push_back("toy_" + std::to_string(i));
  b.bank = std::make_shared<const EmbeddingBank>(build_bank(*backends.embedder, b.train_images, std::move(ids)));
  b.negative_embeddings = backends.embedder->embed_images(backends.world->sample_batch(rng, negative_count).pixels);
  b.guidance_images = backends.world->sample_batch(rng, guidance_count, &b.guidance_factors);
  return b;
}

/// Retrieval accuracy, identity diversity and per-image time of one mode.
inline ModelReport evaluate_mode(const Pipeline& pipeline, GenerationMode mode, const std::string& name,
                                 const EvalProtocol& protocol, const Mat<float>& negative_embeddings,
                                 const ImageBatch<float>* guidance_pool = nullptr) {
  protocol.validate();
  require(!protocol.captions.empty(), "evaluation", "protocol has no captions");
  if (mode == GenerationMode::img) require(guidance_pool && guidance_pool->size() > 0, "evaluation", "img mode needs guidance images");
  const auto& backends = pipeline.backends();
  RetrievalTally tally(protocol.ks);
  double diversity = 0.0;
  for (std::size_t i = 0; i < protocol.captions.size(); ++i) {
    const auto& caption = protocol.captions[i];
    Rng gen_rng(derive_seed(protocol.seed, 2 * i));
    Rng neg_rng(derive_seed(protocol.seed, 2 * i + 1));
    Image guidance;
    if (guidance_pool) guidance = guidance_pool->image(static_cast<int>(i % static_cast<std::size_t>(guidance_pool->size())));
    auto out = pipeline.generate(mode, caption, protocol.images_per_caption, gen_rng, guidance_pool ? &guidance : nullptr);
    const Mat<float> emb = backends.embedder->embed_images(out.images.pixels);
    const auto prompt = backends.embedder->embed_text(caption);
    tally.merge(retrieval_accuracy(emb, prompt.values, negative_embeddings, protocol, neg_rng));
    diversity += id_diversity(out.images, *backends.identity);
  }
  ModelReport r;
  r.model = name;
  r.ks = protocol.ks;
  r.accuracy = tally.accuracy();
  r.id_diversity = diversity / static_cast<double>(protocol.captions.size());
  Rng timing_rng(derive_seed(protocol.seed, 0x7157));
  Image guidance;
  if (guidance_pool) guidance = guidance_pool->image(0);
  r.seconds_per_image = timing_report(
      [&] { pipeline.generate(mode, protocol.captions.front(), 1, timing_rng, guidance_pool ? &guidance : nullptr); }, 20);
  check_accuracy_monotone(r);
  return r;
}

struct AblationVariant {
  std::string name;
  std::string encoder_mode;
  bool variational;
};

inline std::vector<AblationVariant> ablation_variants() {
  return {{"Ours", "full", true},
          {"Encoder (img only)", "img_only", true},
          {"Encoder (CLIP only)", "clip_only", true},
          {"Non-variational", "full", false}};
}

/// Trains and evaluates each architecture variant from the same base config;
/// only `model.encoder_mode` and `model.variational` change between rows.
inline std::vector<ModelReport> run_ablation(const Config& base, const Backends<float>& backends,
                                             const ToyBenchmark& bench, const EvalProtocol& protocol,
                                             GenerationMode mode = GenerationMode::full) {
  std::vector<ModelReport> rows;
  for (const auto& v : ablation_variants()) {
    Config c = base;
    c.set("model.encoder_mode", v.encoder_mode);
    c.set("model.variational", v.variational ? "true" : "false");
    auto trained = train(c, bench.train_images, backends.training());
    auto adapter = std::make_shared<const CvaeAdapter<float>>(std::move(trained.adapter));
    Pipeline p(adapter, backends, bench.bank, InferenceOptions::from(c));
    rows.push_back(evaluate_mode(p, mode, v.name, protocol, bench.negative_embeddings, &bench.guidance_images));
  }
  return rows;
}

}  // namespace latentbridge
