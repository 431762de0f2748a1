#include "support.hpp"

using namespace latentbridge;

namespace {

struct Fixture {
  Config config = lbtest::small_world_config();
  Backends<float> backends = make_backends<float>(config);
  std::shared_ptr<CvaeAdapter<float>> adapter;
  std::shared_ptr<const EmbeddingBank> bank;

  explicit Fixture(bool variational = true) {
    config.set("model.variational", variational ? "true" : "false");
    backends = make_backends<float>(config);
    adapter = std::make_shared<CvaeAdapter<float>>(AdapterConfig::from(config));
    lbtest::randomize_decoder_head(*adapter, 21, 0.5);
    Rng rng(22);
    const auto images = backends.world->sample_batch(rng, 120);
    std::vector<std::string> ids;
    for (int i = 0; i < 120; ++i) ids.push_back("b" + std::to_string(i));
    bank = std::make_shared<const EmbeddingBank>(build_bank(*backends.embedder, images, ids));
  }

  Pipeline pipeline(InferenceOptions o = small_options()) const { return Pipeline(adapter, backends, bank, o); }

  static InferenceOptions small_options() {
    InferenceOptions o;
    o.prior.k = 10;
    o.prior.m = 3;
    return o;
  }

  Image guidance() const {
    Rng rng(23);
    return backends.world->sample_batch(rng, 1).image(0);
  }
};

const std::string kCaption = "toy:a2=1,a5=-1";

}  // namespace

TEST(Pipeline, OneGeneratorForwardPerImageInEveryMode) {
  Fixture f;
  const auto p = f.pipeline();
  const auto g = f.guidance();
  for (auto mode : {GenerationMode::full, GenerationMode::pt, GenerationMode::img}) {
    for (int n : {1, 8, 64}) {
      Rng rng(1);
      const auto before = f.backends.generator->forward_calls();
      const auto out = p.generate(mode, kCaption, n, rng, &g);
      EXPECT_EQ(out.images.size(), n);
      EXPECT_EQ(f.backends.generator->forward_calls() - before, static_cast<std::uint64_t>(n))
          << to_string(mode) << " n=" << n;
    }
  }
}

TEST(Pipeline, SameSeedSameImages) {
  Fixture f;
  const auto p = f.pipeline();
  const auto g = f.guidance();
  for (auto mode : {GenerationMode::full, GenerationMode::pt, GenerationMode::img}) {
    Rng a(5), b(5), c(6);
    const auto x = p.generate(mode, kCaption, 4, a, &g);
    const auto y = p.generate(mode, kCaption, 4, b, &g);
    const auto z = p.generate(mode, kCaption, 4, c, &g);
    EXPECT_EQ(x.images.pixels, y.images.pixels) << to_string(mode);
    EXPECT_NE(x.images.pixels, z.images.pixels) << to_string(mode);
  }
}

TEST(Pipeline, PtContextIsTheTextEmbeddingForEveryImage) {
  Fixture f;
  const auto p = f.pipeline();
  Rng rng(7);
  const auto out = p.generate_pt(kCaption, 5, rng);
  const auto t = f.backends.embedder->embed_text(kCaption);
  for (int j = 0; j < 5; ++j) EXPECT_EQ(Vec<float>(out.contexts.col(j)), t.values);
}

TEST(Pipeline, PtWithSharedLatentGivesIdenticalImages) {
  Fixture f;
  const auto p = f.pipeline();
  Rng rng(8);
  Mat<float> z = standard_normal<float>(rng, f.adapter->latent_dim(), 1).replicate(1, 3);
  const auto out = p.generate_pt_with_latents(kCaption, z);
  EXPECT_EQ(out.images.pixels.col(0), out.images.pixels.col(1));
  EXPECT_EQ(out.images.pixels.col(0), out.images.pixels.col(2));
}

TEST(Pipeline, FullContextsComeFromTheBankNeighborhood) {
  Fixture f;
  const auto p = f.pipeline();
  Rng rng(9);
  const auto out = p.generate_full(kCaption, 6, rng);
  const auto t = f.backends.embedder->embed_text(kCaption);
  const auto nn = top_k(*f.bank, t.values, 10);
  Mat<float> span(f.bank->dim(), 10);
  for (int i = 0; i < 10; ++i) span.col(i) = f.bank->vectors().col(nn[static_cast<std::size_t>(i)].index);
  for (int j = 0; j < 6; ++j) {
    const Vec<double> c = out.contexts.col(j).cast<double>();
    const Mat<double> s = span.cast<double>();
    const Vec<double> w = s.colPivHouseholderQr().solve(c);
    EXPECT_LT((s * w - c).norm(), 1e-5);
    EXPECT_NEAR(w.sum(), 1.0, 1e-4);
    EXPECT_GT(w.minCoeff(), -1e-4);
  }
  for (int j = 1; j < 6; ++j) EXPECT_NE(out.contexts.col(0), out.contexts.col(j));
}

TEST(Pipeline, SingleEntryBankOfTheTextEmbeddingReducesFullToPt) {
  Fixture f;
  const auto t = f.backends.embedder->embed_text(kCaption);
  auto bank = std::make_shared<const EmbeddingBank>(std::vector<std::string>{"text"}, Mat<float>(t.values), "test");
  InferenceOptions o;
  o.prior.k = 1;
  o.prior.m = 1;
  Pipeline p(f.adapter, f.backends, bank, o);
  Rng rng(10);
  const auto full = p.generate_full(kCaption, 4, rng);
  const auto pt = p.generate_pt_with_latents(kCaption, full.latents);
  EXPECT_EQ(full.contexts, pt.contexts);
  EXPECT_EQ(full.images.pixels, pt.images.pixels);
}

TEST(Pipeline, NonVariationalLatentsAreZero) {
  Fixture f(false);
  const auto p = f.pipeline();
  const auto g = f.guidance();
  Rng rng(11);
  const auto pt = p.generate_pt(kCaption, 4, rng);
  EXPECT_TRUE(pt.latents.isZero(0));
  for (int j = 1; j < 4; ++j) EXPECT_EQ(pt.images.pixels.col(0), pt.images.pixels.col(j));
  const auto img = p.generate_img_guided(kCaption, g, 3, rng);
  EXPECT_EQ(img.latents.col(0), img.latents.col(1));
}

TEST(Pipeline, GuidedLatentsCenterOnThePosteriorMean) {
  Fixture f;
  const auto p = f.pipeline();
  const auto g = f.guidance();
  const auto [mu, logvar] = f.adapter->encode(g, f.backends.embedder->embed_image(g));
  Rng rng(12);
  const int n = 4000;
  const auto out = p.generate_img_guided(kCaption, g, n, rng);
  const Vec<float> mean = out.latents.rowwise().mean();
  for (int i = 0; i < mu.size(); ++i) {
    const double se = std::exp(0.5 * logvar[i]) / std::sqrt(static_cast<double>(n));
    EXPECT_NEAR(mean[i], mu[i], 4 * se) << i;
  }
}

TEST(Pipeline, GuidedContextOptions) {
  Fixture f;
  const auto g = f.guidance();
  auto o = Fixture::small_options();
  o.guided_context = GuidedContext::text;
  Rng rng(13);
  auto out = f.pipeline(o).generate_img_guided(kCaption, g, 2, rng);
  EXPECT_EQ(Vec<float>(out.contexts.col(0)), f.backends.embedder->embed_text(kCaption).values);
  o.guided_context = GuidedContext::guidance_image;
  out = f.pipeline(o).generate_img_guided(kCaption, g, 2, rng);
  EXPECT_EQ(out.contexts.col(1), f.backends.embedder->embed_images(g.pixels).col(0));
  EXPECT_EQ(parse_guided_context("text_prior"), GuidedContext::text_prior);
  EXPECT_THROW(parse_guided_context("nope"), ConfigError);
}

TEST(Pipeline, TruncationScalesLatents) {
  Fixture f;
  auto o = Fixture::small_options();
  o.truncation = 0.5;
  Rng a(14), b(14);
  const auto half = f.pipeline(o).generate_pt(kCaption, 3, a);
  const auto full = f.pipeline().generate_pt(kCaption, 3, b);
  EXPECT_TRUE(half.latents.isApprox(0.5f * full.latents));
}

TEST(Pipeline, ConfigurationErrors) {
  Fixture f;
  Pipeline no_bank(f.adapter, f.backends, nullptr, Fixture::small_options());
  Rng rng(15);
  EXPECT_THROW(no_bank.generate_full(kCaption, 2, rng), ConfigError);
  EXPECT_NO_THROW(no_bank.generate_pt(kCaption, 2, rng));
  EXPECT_THROW(no_bank.generate(GenerationMode::img, kCaption, 2, rng, nullptr), ConfigError);
  EXPECT_THROW(no_bank.generate_pt(kCaption, 0, rng), InputError);
  auto o = Fixture::small_options();
  o.prior.k = 500;
  EXPECT_THROW(f.pipeline(o).generate_full(kCaption, 2, rng), InputError);
  auto wide = make_backends<float>(Config{});
  EXPECT_THROW(Pipeline(f.adapter, wide, f.bank), ConfigError);
  EXPECT_EQ(parse_generation_mode("pt"), GenerationMode::pt);
  EXPECT_THROW(parse_generation_mode("fast"), InputError);
}
