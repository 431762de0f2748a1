#pragma once

#include <filesystem>
#include <memory>

#include "latentbridge/core/config.hpp"
#include "latentbridge/embedding/toy_embedder.hpp"
#include "latentbridge/eval/identity.hpp"
#include "latentbridge/generator/generator.hpp"
#include "latentbridge/training/perceptual.hpp"
#include "latentbridge/training/trainer.hpp"

namespace latentbridge {

/// The frozen components a pipeline runs against, built from one config.
template <typename Scalar>
struct Backends {
  std::shared_ptr<const ToyWorld<Scalar>> world;  // null unless toy
  std::shared_ptr<const EmbeddingBackend<Scalar>> embedder;
  std::shared_ptr<const GeneratorBackend<Scalar>> generator;
  std::shared_ptr<const PerceptualMetric<Scalar>> perceptual;
  std::shared_ptr<const IdentityBackend<Scalar>> identity;

  TrainingBackends<Scalar> training() const { return {*embedder, *generator, *perceptual}; }

  const ToyEmbedder<Scalar>* toy_embedder() const { return dynamic_cast<const ToyEmbedder<Scalar>*>(embedder.get()); }
};

inline ToyWorldConfig toy_world_config(const Config& c) {
  ToyWorldConfig w;
  w.attribute_dims = static_cast<int>(c.get_int("world.attribute_dims", w.attribute_dims));
  w.nuisance_dims = static_cast<int>(c.get_int("world.nuisance_dims", w.nuisance_dims));
  w.shape.channels = static_cast<int>(c.get_int("image.channels", w.shape.channels));
  w.shape.height = static_cast<int>(c.get_int("image.height", w.shape.height));
  w.shape.width = static_cast<int>(c.get_int("image.width", w.shape.width));
  w.seed = c.get_u64("world.seed", w.seed);
  return w;
}

inline ToyEmbedderConfig toy_embedder_config(const Config& c) {
  ToyEmbedderConfig e;
  e.dim = static_cast<int>(c.get_int("embedding.dim", e.dim));
  e.gap = c.get_double("embedding.gap", e.gap);
  e.leakage = c.get_double("embedding.leakage", e.leakage);
  e.seed = c.get_u64("embedding.seed", e.seed);
  return e;
}

inline ToyGeneratorConfig toy_generator_config(const Config& c) {
  ToyGeneratorConfig g;
  g.latent_dim = static_cast<int>(c.get_int("generator.latent_dim", g.latent_dim));
  g.seed = c.get_u64("generator.seed", g.seed);
  return g;
}

/// External backends are thin slots: they need weights on disk and a runtime
/// that this build does not ship, so selecting one is a configuration error.
inline void require_external_weights(const Config& c, const std::string& key, const std::string& what) {
  const std::string path = c.get_string(key, "");
  if (path.empty() || !std::filesystem::exists(path)) {
    throw ConfigError(what, "the external " + what + " backend needs weights ('" + key + "'); none found" +
                                (path.empty() ? "" : " at '" + path + "'"));
  }
  throw ConfigError(what, "weights found at '" + path + "' but no external " + what +
                              " runtime is linked into this build; use the toy backend");
}

template <typename Scalar>
Backends<Scalar> make_backends(const Config& c) {
  Backends<Scalar> b;
  const std::string emb = c.get_string("embedding.backend", "toy");
  const std::string gen = c.get_string("generator.backend", "toy");
  if (emb != "toy" && emb != "real") throw ConfigError("embedding", "unknown embedding backend '" + emb + "'");
  if (gen != "toy" && gen != "external") throw ConfigError("generator", "unknown generator backend '" + gen + "'");
  if (emb == "real") require_external_weights(c, "embedding.weights", "embedding");
  if (gen == "external") require_external_weights(c, "generator.weights", "generator");

  auto world = std::make_shared<const ToyWorld<Scalar>>(toy_world_config(c));
  b.world = world;
  b.embedder = std::make_shared<const ToyEmbedder<Scalar>>(world, toy_embedder_config(c));
  b.generator = std::make_shared<const ToyGenerator<Scalar>>(world, toy_generator_config(c));
  ToyPerceptualConfig pc;
  pc.seed = c.get_u64("perceptual.seed", pc.seed);
  b.perceptual = std::make_shared<const ToyPerceptual<Scalar>>(world->shape(), pc);
  b.identity = std::make_shared<const ToyIdentity<Scalar>>(world->shape(), static_cast<int>(c.get_int("identity.dim", 64)),
                                                           c.get_u64("identity.seed", 0x1DE));
  return b;
}

}  // namespace latentbridge
