#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <numeric>
#include <optional>

#include "latentbridge/adapter/checkpoint.hpp"
#include "latentbridge/adapter/cvae.hpp"
#include "latentbridge/training/losses.hpp"

namespace latentbridge {

struct TrainConfig {
  double learning_rate = 2e-4;
  LossWeights weights;
  int iterations = 2000;
  int batch_size = 16;
  std::uint64_t seed = 0;
  EncoderMode encoder_mode = EncoderMode::full;
  bool variational = true;
  bool freeze_conv = false;
  int checkpoint_every = 500;

  /// Weights actually applied; a non-variational model has no KL term.
  LossWeights effective_weights() const {
    LossWeights w = weights;
    if (!variational) w.kl = 0.0;
    return w;
  }

  static TrainConfig from(const Config& c) {
    TrainConfig t;
    t.learning_rate = c.get_double("train.learning_rate", t.learning_rate);
    t.weights.perceptual = c.get_double("loss.perceptual", t.weights.perceptual);
    t.weights.clip_cycle = c.get_double("loss.clip_cycle", t.weights.clip_cycle);
    t.weights.w_norm = c.get_double("loss.w_norm", t.weights.w_norm);
    t.weights.kl = c.get_double("loss.kl", t.weights.kl);
    t.iterations = static_cast<int>(c.get_int("train.iterations", t.iterations));
    t.batch_size = static_cast<int>(c.get_int("train.batch_size", t.batch_size));
    t.seed = c.get_u64("train.seed", t.seed);
    t.encoder_mode = parse_encoder_mode(c.get_string("model.encoder_mode", "full"));
    t.variational = c.get_bool("model.variational", t.variational);
    t.freeze_conv = c.get_bool("train.freeze_conv", t.freeze_conv);
    t.checkpoint_every = static_cast<int>(c.get_int("train.checkpoint_every", t.checkpoint_every));
    t.validate();
    return t;
  }

  void validate() const {
    if (!(learning_rate > 0.0)) throw ConfigError("training", "learning rate must be positive");
    if (weights.perceptual < 0 || weights.clip_cycle < 0 || weights.w_norm < 0 || weights.kl < 0) {
      throw ConfigError("training", "loss weights must be non-negative");
    }
    if (iterations < 0) throw ConfigError("training", "iterations must be non-negative");
    if (batch_size <= 0) throw ConfigError("training", "batch size must be positive");
    if (checkpoint_every <= 0) throw ConfigError("training", "checkpoint interval must be positive");
  }
};

/// Frozen pieces the adapter is trained against.
template <typename Scalar>
struct TrainingBackends {
  const EmbeddingBackend<Scalar>& embedder;
  const GeneratorBackend<Scalar>& generator;
  const PerceptualMetric<Scalar>& perceptual;
};

/// Batch-mean loss components for one batch; accumulates parameter gradients
/// of the weighted total into the adapter when `accumulate` is set.
template <typename Scalar>
LossComponents loss_and_gradients(CvaeAdapter<Scalar>& adapter, const Mat<Scalar>& pixels, const Mat<Scalar>& noise,
                                  const TrainingBackends<Scalar>& backends, const LossWeights& weights,
                                  bool accumulate = true) {
  const auto batch = pixels.cols();
  const Scalar inv_b = Scalar(1) / static_cast<Scalar>(batch);
  const bool variational = adapter.config().variational;
  Mat<Scalar> contexts = backends.embedder.embed_images(pixels);

  typename CvaeAdapter<Scalar>::Tape tape;
  auto f = adapter.forward_train(pixels, contexts, noise, backends.generator, accumulate ? &tape : nullptr);

  const Vec<Scalar> perceptual = backends.perceptual.distances(pixels, f.reconstruction);
  const Mat<Scalar> e_hat = backends.embedder.embed_images(f.reconstruction);
  const Vec<Scalar> cycle = clip_cycle_from_embeddings(contexts, e_hat);

  LossComponents c;
  c.perceptual = perceptual.template cast<double>().mean();
  c.clip_cycle = cycle.template cast<double>().mean();
  c.w_norm = f.offset.template cast<double>().colwise().squaredNorm().mean();
  c.kl = 0.0;
  if (variational) {
    for (Eigen::Index j = 0; j < batch; ++j) c.kl += kl_loss(f.mu.col(j), f.logvar.col(j));
    c.kl /= static_cast<double>(batch);
  }
  if (!accumulate) return c;
  total_loss(c, weights);  // throws on non-finite components

  const Vec<Scalar> per_sample = Vec<Scalar>::Constant(batch, static_cast<Scalar>(weights.perceptual) * inv_b);
  Mat<Scalar> d_image = backends.perceptual.distances_vjp(pixels, f.reconstruction, per_sample);
  // d(1 - <e, e_hat>)/d(e_hat) = -e; the embedder's vjp handles its normalization.
  d_image += backends.embedder.embed_images_vjp(f.reconstruction,
                                                contexts * static_cast<Scalar>(-weights.clip_cycle * inv_b));
  Mat<Scalar> d_offset = backends.generator.generate_vjp(f.latents, d_image);
  d_offset += f.offset * static_cast<Scalar>(2.0 * weights.w_norm * inv_b);

  Mat<Scalar> d_z = adapter.decode_backward(d_offset, tape);
  Mat<Scalar> d_mu = d_z;
  Mat<Scalar> d_logvar = Mat<Scalar>::Zero(d_z.rows(), d_z.cols());
  if (variational) {
    const Scalar wk = static_cast<Scalar>(weights.kl) * inv_b;
    d_logvar = d_z.array() * noise.array() * Scalar(0.5) * (Scalar(0.5) * f.logvar.array()).exp();
    d_mu += wk * f.mu;
    d_logvar.array() += wk * Scalar(0.5) * (f.logvar.array().exp() - Scalar(1));
  }
  adapter.encode_backward(d_mu, d_logvar, tape);
  return c;
}

struct LossRecord {
  int iteration = 0;
  LossComponents components;
  double total = 0.0;
};

struct TrainReport {
  std::vector<LossRecord> history;
  std::string final_checkpoint;
  double wall_seconds = 0.0;
  std::uint64_t backend_checksum_before = 0;
  std::uint64_t backend_checksum_after = 0;
};

struct TrainOptions {
  std::string out_dir;  // empty: no checkpoints written
  std::function<void(const LossRecord&)> on_iteration;
};

struct TrainResult {
  CvaeAdapter<float> adapter;
  TrainReport report;
};

inline std::uint64_t combined_checksum(const TrainingBackends<float>& b) {
  Fnv1a h;
  const std::uint64_t parts[] = {b.embedder.parameter_checksum(), b.generator.parameter_checksum(),
                                 b.perceptual.parameter_checksum()};
  h.update(parts, sizeof(parts));
  return h.digest();
}

/// Trains a fresh adapter on `dataset` against frozen backends. The adapter
/// architecture comes from `config`; only adapter parameters are updated.
inline TrainResult train(const Config& config, const ImageBatch<float>& dataset, const TrainingBackends<float>& backends,
                         const TrainOptions& options = {}) {
  const auto start = std::chrono::steady_clock::now();
  const TrainConfig tc = TrainConfig::from(config);
  if (dataset.size() == 0) throw InputError("training", "training dataset is empty");
  require(dataset.shape == backends.embedder.image_shape(), "training", "dataset image shape does not match the embedder");

  CvaeAdapter<float> adapter(AdapterConfig::from(config));
  require(adapter.config().image == dataset.shape, "training", "adapter image shape does not match the dataset");
  if (tc.freeze_conv) adapter.set_conv_trainable(false);
  auto params = adapter.parameters();
  nn::Adam<float> optimizer(tc.learning_rate);
  const LossWeights weights = tc.effective_weights();

  TrainReport report;
  report.backend_checksum_before = combined_checksum(backends);

  namespace fs = std::filesystem;
  if (!options.out_dir.empty()) fs::create_directories(options.out_dir);
  auto write = [&](const std::string& name, const CvaeAdapter<float>& a) {
    const std::string path = (fs::path(options.out_dir) / name).string();
    save_checkpoint(config, a, path);
    return path;
  };

  Rng data_rng(derive_seed(tc.seed, 61));
  Rng noise_rng(derive_seed(tc.seed, 62));
  std::vector<int> order(static_cast<std::size_t>(dataset.size()));
  std::size_t cursor = order.size();

  std::vector<Mat<float>> last_good;
  int last_good_iteration = 0;
  auto snapshot = [&](int it) {
    last_good.clear();
    for (auto* p : params) last_good.push_back(p->value);
    last_good_iteration = it;
  };
  snapshot(0);

  Mat<float> batch(dataset.shape.pixel_count(), tc.batch_size);
  for (int it = 1; it <= tc.iterations; ++it) {
    for (int j = 0; j < tc.batch_size; ++j) {
      if (cursor == order.size()) {
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), data_rng);
        cursor = 0;
      }
      batch.col(j) = dataset.pixels.col(order[cursor++]);
    }
    Mat<float> noise = standard_normal<float>(noise_rng, adapter.latent_dim(), tc.batch_size);

    adapter.zero_grad();
    LossRecord rec;
    rec.iteration = it;
    try {
      rec.components = loss_and_gradients(adapter, batch, noise, backends, weights);
      rec.total = total_loss(rec.components, weights);
    } catch (const NumericError& e) {
      for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = last_good[i];
      std::string where = "no checkpoint directory configured";
      if (!options.out_dir.empty()) where = "last good checkpoint written to " + write("checkpoint.cvck", adapter);
      throw NumericError("training", "aborted at iteration " + std::to_string(it) + " (" + e.what() +
                                         "); restored parameters from iteration " +
                                         std::to_string(last_good_iteration) + ", " + where);
    }
    optimizer.step(params);
    report.history.push_back(rec);
    if (options.on_iteration) options.on_iteration(rec);

    if (it % tc.checkpoint_every == 0) {
      snapshot(it);
      if (!options.out_dir.empty()) write("checkpoint_" + std::to_string(it) + ".cvck", adapter);
    }
  }

  if (!options.out_dir.empty()) report.final_checkpoint = write("checkpoint.cvck", adapter);
  report.backend_checksum_after = combined_checksum(backends);
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return TrainResult{std::move(adapter), std::move(report)};
}

}  // namespace latentbridge
