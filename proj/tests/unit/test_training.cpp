#include "support.hpp"

using namespace latentbridge;
using lbtest::TempDir;

namespace {

// Per-dimension closed form, written out independently of kl_loss.
double kl_oracle(const std::vector<double>& mu, const std::vector<double>& logvar) {
  double s = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    const double var = std::exp(logvar[i]);
    s += 0.5 * (mu[i] * mu[i] + var - std::log(var) - 1.0);
  }
  return s;
}

Vec<double> vec(std::initializer_list<double> xs) {
  Vec<double> v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

ImageBatch<float> small_dataset(const Backends<float>& b, int n, std::uint64_t seed) {
  Rng rng(seed);
  return b.world->sample_batch(rng, n);
}

Config small_training_config(int iterations) {
  Config c = lbtest::small_world_config();
  c.set("train.iterations", std::to_string(iterations));
  c.set("train.batch_size", "4");
  c.set("train.checkpoint_every", "5");
  return c;
}

}  // namespace

TEST(KlLoss, KnownValues) {
  EXPECT_NEAR(kl_loss(vec({1.0}), vec({0.0})), 0.5, 1e-15);
  EXPECT_EQ(kl_loss(vec({0.0, 0.0, 0.0}), vec({0.0, 0.0, 0.0})), 0.0);
  EXPECT_NEAR(kl_loss(vec({0.0}), vec({std::log(2.0)})), 0.5 * (1.0 - std::log(2.0)), 1e-15);
  EXPECT_THROW(kl_loss(vec({0.0}), vec({0.0, 1.0})), InputError);
}

TEST(KlLoss, MatchesPerDimensionOracle) {
  Rng rng(1);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> mu(7), lv(7);
    for (int i = 0; i < 7; ++i) {
      mu[i] = n(rng);
      lv[i] = 2.0 * n(rng);
    }
    Vec<double> m = Eigen::Map<Vec<double>>(mu.data(), 7);
    Vec<double> l = Eigen::Map<Vec<double>>(lv.data(), 7);
    EXPECT_NEAR(kl_loss(m, l), kl_oracle(mu, lv), 1e-12);
    EXPECT_GE(kl_loss(m, l), 0.0);
  }
}

TEST(TotalLoss, IsTheWeightedSum) {
  LossComponents c{0.3, 0.1, 5.0, 2.0};
  LossWeights w;
  EXPECT_NEAR(total_loss(c, w), 0.3 + 0.1 + 2e-4 * 5.0 + 0.2 * 2.0, 1e-15);
  LossWeights only_kl{0, 0, 0, 1};
  EXPECT_EQ(total_loss(c, only_kl), 2.0);
  LossComponents doubled{0.6, 0.2, 10.0, 4.0};
  EXPECT_NEAR(total_loss(doubled, w), 2.0 * total_loss(c, w), 1e-15);
}

TEST(TotalLoss, NonFiniteComponentIsNamed) {
  LossComponents c{0.3, std::numeric_limits<double>::quiet_NaN(), 0, 0};
  try {
    total_loss(c, LossWeights{});
    FAIL();
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("clip_cycle"), std::string::npos);
  }
}

TEST(WNormLoss, IsSquaredEuclideanNorm) {
  EXPECT_EQ(w_norm_loss(vec({3.0, 4.0})), 25.0);
  EXPECT_EQ(w_norm_loss(Vec<double>::Zero(9)), 0.0);
}

TEST(ClipCycle, CosineGeometry) {
  Mat<double> a(3, 3), b(3, 3);
  a << 1, 1, 0, 0, 0, 1, 0, 0, 0;
  b << 1, -1, 1, 0, 0, 0, 0, 0, 0;
  // Columns: identical, antiparallel, orthogonal.
  const auto d = clip_cycle_from_embeddings(a, b);
  EXPECT_NEAR(d[0], 0.0, 1e-15);
  EXPECT_NEAR(d[1], 2.0, 1e-15);
  EXPECT_NEAR(d[2], 1.0, 1e-15);
}

TEST(ClipCycle, SameImageIsZero) {
  auto b = make_backends<double>(Config{});
  Rng rng(2);
  const auto x = b.world->sample_batch(rng, 1).image(0);
  EXPECT_NEAR(clip_cycle_loss(*b.embedder, x, x), 0.0, 1e-12);
}

TEST(ToyPerceptual, ZeroOnIdenticalAndSymmetric) {
  ToyPerceptual<double> p({3, 16, 16});
  Rng rng(3);
  Mat<double> a = uniform<double>(rng, 768, 4, 0.0, 1.0);
  Mat<double> b = uniform<double>(rng, 768, 4, 0.0, 1.0);
  EXPECT_LT(p.distances(a, a).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((p.distances(a, b) - p.distances(b, a)).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_GT(p.distances(a, b).minCoeff(), 0.0);
}

TEST(ToyPerceptual, GrowsWithNoiseAmplitude) {
  ToyPerceptual<double> p({3, 16, 16});
  Rng rng(4);
  Mat<double> a = uniform<double>(rng, 768, 8, 0.2, 0.8);
  Mat<double> noise = standard_normal<double>(rng, 768, 8);
  double prev = 0.0;
  for (double t : {0.01, 0.03, 0.1, 0.3}) {
    const double d = p.distances(a, a + t * noise).mean();
    EXPECT_GT(d, prev) << "amplitude " << t;
    prev = d;
  }
}

TEST(ToyPerceptual, VjpMatchesFiniteDifferences) {
  ToyPerceptual<double> p({3, 8, 8});
  Rng rng(5);
  Mat<double> a = uniform<double>(rng, 192, 2, 0.0, 1.0);
  Mat<double> b = uniform<double>(rng, 192, 2, 0.0, 1.0);
  Vec<double> w(2);
  w << 0.7, -1.3;
  Mat<double> g = p.distances_vjp(a, b, w);
  auto f = [&] { return p.distances(a, b).dot(w); };
  for (int i = 0; i < b.size(); i += 11) {
    const double numeric = lbtest::central_difference(f, b.data()[i], 1e-6);
    EXPECT_LT(std::abs(g.data()[i] - numeric), 1e-7 + 1e-5 * std::abs(numeric)) << i;
  }
}

TEST(ToyPerceptual, CosmeticDifferencesCostLessThanIdentityDifferences) {
  auto b = make_backends<double>(Config{});
  const auto& world = *b.world;
  Rng rng(6);
  Mat<double> f;
  auto batch = world.sample_batch(rng, 64, &f);
  Mat<double> nuisance_zeroed = f, attributes_zeroed = f;
  nuisance_zeroed.bottomRows(world.config().nuisance_dims).setZero();
  attributes_zeroed.topRows(world.config().attribute_dims).setZero();
  const auto& px = batch.pixels;
  const double d_nuisance = b.perceptual->distances(px, world.render_factors(nuisance_zeroed)).mean();
  const double d_attributes = b.perceptual->distances(px, world.render_factors(attributes_zeroed)).mean();
  EXPECT_GT(d_nuisance, 0.0);
  EXPECT_LT(d_nuisance, d_attributes);
}

TEST(LossAndGradients, AnalyticGradientMatchesFiniteDifferences) {
  const Config c = lbtest::small_world_config();
  auto b = make_backends<double>(c);
  CvaeAdapter<double> adapter(AdapterConfig::from(c));
  lbtest::randomize_decoder_head(adapter, 7, 0.3);
  Rng rng(8);
  Mat<double> px = b.world->sample_batch(rng, 3).pixels;
  Mat<double> noise = standard_normal<double>(rng, 6, 3);
  const LossWeights w;
  adapter.zero_grad();
  loss_and_gradients(adapter, px, noise, b.training(), w);
  auto f = [&] { return total_loss(loss_and_gradients(adapter, px, noise, b.training(), w, false), w); };
  int checked = 0;
  for (auto* p : adapter.parameters()) {
    for (int i = 0; i < p->value.size(); i += 13) {
      const double numeric = lbtest::central_difference(f, p->value.data()[i], 1e-6);
      EXPECT_LT(std::abs(p->grad.data()[i] - numeric), 1e-9 + 1e-4 * std::abs(numeric)) << p->name << "[" << i << "]";
      ++checked;
    }
  }
  EXPECT_GT(checked, 40);
}

TEST(LossAndGradients, NonVariationalHasNoKlAndIgnoresNoise) {
  Config c = lbtest::small_world_config();
  c.set("model.variational", "false");
  auto b = make_backends<double>(c);
  CvaeAdapter<double> adapter(AdapterConfig::from(c));
  lbtest::randomize_decoder_head(adapter, 9);
  Rng rng(10);
  Mat<double> px = b.world->sample_batch(rng, 2).pixels;
  const auto l1 = loss_and_gradients(adapter, px, standard_normal<double>(rng, 6, 2), b.training(), {}, false);
  const auto l2 = loss_and_gradients(adapter, px, standard_normal<double>(rng, 6, 2), b.training(), {}, false);
  EXPECT_EQ(l1.kl, 0.0);
  EXPECT_EQ(l1.perceptual, l2.perceptual);
}

TEST(Train, BackendsStayFrozen) {
  const Config c = small_training_config(10);
  auto b = make_backends<float>(c);
  const auto data = small_dataset(b, 20, 1);
  const auto before = combined_checksum(b.training());
  auto r = train(c, data, b.training());
  EXPECT_EQ(r.report.backend_checksum_before, before);
  EXPECT_EQ(r.report.backend_checksum_after, before);
  EXPECT_EQ(r.report.history.size(), 10u);
  EXPECT_EQ(r.report.history.back().iteration, 10);
}

TEST(Train, ZeroIterationsReturnsInitialization) {
  const Config c = small_training_config(0);
  auto b = make_backends<float>(c);
  auto r = train(c, small_dataset(b, 5, 2), b.training());
  CvaeAdapter<float> fresh(AdapterConfig::from(c));
  const auto p = r.adapter.parameters();
  const auto q = fresh.parameters();
  for (std::size_t i = 0; i < p.size(); ++i) EXPECT_EQ(p[i]->value, q[i]->value) << p[i]->name;
  EXPECT_TRUE(r.report.history.empty());
}

TEST(Train, IsDeterministic) {
  const Config c = small_training_config(6);
  auto b = make_backends<float>(c);
  const auto data = small_dataset(b, 12, 3);
  auto r1 = train(c, data, b.training());
  auto r2 = train(c, data, b.training());
  EXPECT_EQ(serialize_checkpoint(c, r1.adapter), serialize_checkpoint(c, r2.adapter));
}

TEST(Train, WritesPeriodicAndFinalCheckpoints) {
  TempDir dir("train");
  const Config c = small_training_config(10);
  auto b = make_backends<float>(c);
  TrainOptions opt;
  opt.out_dir = dir.path().string();
  auto r = train(c, small_dataset(b, 8, 4), b.training(), opt);
  EXPECT_EQ(r.report.final_checkpoint, dir.file("checkpoint.cvck"));
  EXPECT_TRUE(std::filesystem::exists(dir.file("checkpoint_5.cvck")));
  EXPECT_TRUE(std::filesystem::exists(dir.file("checkpoint_10.cvck")));
  const auto loaded = load_checkpoint(r.report.final_checkpoint);
  EXPECT_EQ(serialize_checkpoint(loaded.config, loaded.adapter), serialize_checkpoint(c, r.adapter));
}

TEST(Train, FrozenConvBranchDoesNotMove) {
  Config c = small_training_config(5);
  c.set("train.freeze_conv", "true");
  auto b = make_backends<float>(c);
  auto r = train(c, small_dataset(b, 8, 5), b.training());
  CvaeAdapter<float> fresh(AdapterConfig::from(c));
  const auto p = r.adapter.parameters();
  const auto q = fresh.parameters();
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i]->name.rfind("conv.", 0) == 0) {
      EXPECT_EQ(p[i]->value, q[i]->value) << p[i]->name;
    } else if (p[i]->name.rfind("mlp_e.", 0) == 0) {
      EXPECT_NE(p[i]->value, q[i]->value) << p[i]->name;
    }
  }
}

TEST(Train, NonFiniteLossAbortsWithLastGoodCheckpoint) {
  TempDir dir("nan");
  const Config c = small_training_config(3);
  auto b = make_backends<float>(c);
  auto data = small_dataset(b, 4, 6);
  data.pixels(0, 2) = std::numeric_limits<float>::quiet_NaN();
  TrainOptions opt;
  opt.out_dir = dir.path().string();
  try {
    train(c, data, b.training(), opt);
    FAIL();
  } catch (const NumericError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("aborted at iteration 1"), std::string::npos) << msg;
    EXPECT_NE(msg.find("iteration 0"), std::string::npos) << msg;
  }
  const auto saved = load_checkpoint(dir.file("checkpoint.cvck"));
  CvaeAdapter<float> fresh(AdapterConfig::from(c));
  EXPECT_EQ(serialize_checkpoint(c, saved.adapter), serialize_checkpoint(c, fresh));
}

TEST(Train, RejectsEmptyDatasetAndBadConfig) {
  const Config c = small_training_config(3);
  auto b = make_backends<float>(c);
  ImageBatch<float> empty;
  empty.shape = {3, 8, 8};
  EXPECT_THROW(train(c, empty, b.training()), InputError);
  Config bad = c;
  bad.set("train.learning_rate", "0");
  EXPECT_THROW(train(bad, small_dataset(b, 4, 7), b.training()), ConfigError);
  bad = c;
  bad.set("loss.kl", "-1");
  EXPECT_THROW(train(bad, small_dataset(b, 4, 7), b.training()), ConfigError);
}

TEST(Train, LossDecreasesAcrossSeeds) {
  for (int seed = 0; seed < 3; ++seed) {
    Config c = small_training_config(300);
    c.set("train.seed", std::to_string(seed));
    c.set("train.batch_size", "8");
    c.set("train.learning_rate", "2e-3");
    auto b = make_backends<float>(c);
    auto r = train(c, small_dataset(b, 200, 10 + seed), b.training());
    double head = 0.0, tail = 0.0;
    for (int i = 0; i < 30; ++i) {
      head += r.report.history[i].total;
      tail += r.report.history[r.report.history.size() - 1 - i].total;
    }
    EXPECT_LT(tail, 0.8 * head) << "seed " << seed;
  }
}
