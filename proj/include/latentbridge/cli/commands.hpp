#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>

#include "latentbridge/adapter/checkpoint.hpp"
#include "latentbridge/eval/harness.hpp"
#include "latentbridge/io/captions.hpp"
#include "latentbridge/io/image_dir.hpp"

// Library side of every CLI subcommand.

namespace latentbridge::commands {

namespace fs = std::filesystem;

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("io", "cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw InputError("io", "short write to '" + path.string() + "'");
}

struct MakeToyDataArgs {
  Config config;
  std::string out;
  int count = 2000;
  std::uint64_t seed = 0;
};

/// Samples toy-world images as PNGs plus a factors.csv with the ground truth.
inline ImageDirectory make_toy_data(const MakeToyDataArgs& a) {
  require(a.count >= 1, "cli", "count must be positive");
  const auto backends = make_backends<float>(a.config);
  require(backends.world != nullptr, "cli", "toy data needs the toy embedding backend");
  Rng rng(derive_seed(a.seed, 91));
  Mat<float> factors;
  ImageDirectory d;
  d.images = backends.world->sample_batch(rng, a.count, &factors);
  const auto paths = save_image_batch(d.images, a.out, "toy");
  std::ostringstream csv;
  csv << "id";
  for (int k = 0; k < factors.rows(); ++k) csv << (k < backends.world->attribute_dims() ? ",a" : ",n") << k;
  csv << "\n" << std::setprecision(9);
  for (std::size_t i = 0; i < paths.size(); ++i) {
    d.ids.push_back(fs::path(paths[i]).stem().string());
    csv << d.ids.back();
    for (int k = 0; k < factors.rows(); ++k) csv << "," << factors(k, static_cast<Eigen::Index>(i));
    csv << "\n";
  }
  write_text(fs::path(a.out) / "factors.csv", csv.str());
  return d;
}

struct BuildBankArgs {
  Config config;
  std::string backend = "toy";
  std::string input;
  std::string out;
  std::optional<std::uint64_t> seed;  // embedder seed
};

inline EmbeddingBank build_bank_command(const BuildBankArgs& a) {
  Config c = a.config;
  c.set("embedding.backend", a.backend);
  if (a.seed) c.set("embedding.seed", std::to_string(*a.seed));
  const auto backends = make_backends<float>(c);
  const auto dir = load_image_dir(a.input, backends.embedder->image_shape());
  auto bank = build_bank(*backends.embedder, dir.images, dir.ids);
  save_bank(bank, a.out);
  return bank;
}

struct TrainArgs {
  Config config;
  std::string data;
  std::string out;
  bool verbose = false;
};

inline TrainReport train_command(const TrainArgs& a) {
  const auto backends = make_backends<float>(a.config);
  const auto dir = load_image_dir(a.data, backends.embedder->image_shape());
  TrainOptions opt;
  opt.out_dir = a.out;
  if (a.verbose) {
    opt.on_iteration = [](const LossRecord& r) {
      if (r.iteration == 1 || r.iteration % 100 == 0) {
        std::fprintf(stderr, "iter %d loss %.5f (perceptual %.5f clip %.5f w %.5f kl %.5f)\n", r.iteration, r.total,
                     r.components.perceptual, r.components.clip_cycle, r.components.w_norm, r.components.kl);
      }
    };
  }
  auto result = train(a.config, dir.images, backends.training(), opt);
  std::ostringstream csv;
  csv << "iteration,total,perceptual,clip_cycle,w_norm,kl\n" << std::setprecision(9);
  for (const auto& r : result.report.history) {
    csv << r.iteration << "," << r.total << "," << r.components.perceptual << "," << r.components.clip_cycle << ","
        << r.components.w_norm << "," << r.components.kl << "\n";
  }
  write_text(fs::path(a.out) / "loss.csv", csv.str());
  std::ostringstream summary;
  summary << "images " << dir.images.size() << "\niterations " << result.report.history.size() << "\nwall_seconds "
          << result.report.wall_seconds << "\nbackend_checksum_before " << result.report.backend_checksum_before
          << "\nbackend_checksum_after " << result.report.backend_checksum_after << "\nconfig_digest "
          << a.config.digest() << "\n";
  write_text(fs::path(a.out) / "train_summary.txt", summary.str());
  return result.report;
}

/// Adapter, backends and (optional) bank rebuilt from a checkpoint's config.
struct LoadedModel {
  Config config;
  Backends<float> backends;
  std::shared_ptr<const CvaeAdapter<float>> adapter;
  std::shared_ptr<const EmbeddingBank> bank;
};

inline LoadedModel load_model(const std::string& checkpoint, const std::string& bank, const Config& overrides) {
  auto ck = load_checkpoint(checkpoint);
  LoadedModel m;
  m.config = ck.config;
  m.config.merge(overrides);
  m.backends = make_backends<float>(m.config);
  m.adapter = std::make_shared<const CvaeAdapter<float>>(std::move(ck.adapter));
  if (!bank.empty()) m.bank = std::make_shared<const EmbeddingBank>(load_bank(bank));
  return m;
}

struct GenerateArgs {
  std::string checkpoint;
  std::string bank;
  Config overrides;  // prior.* / inference.* keys
  GenerationMode mode = GenerationMode::full;
  std::string prompt;
  std::string guidance;
  int n = 1;
  std::uint64_t seed = 0;
  std::string out;
  bool grid = false;
};

inline GeneratedBatch generate_command(const GenerateArgs& a) {
  require(a.n >= 1, "cli", "-n must be positive");
  const auto m = load_model(a.checkpoint, a.bank, a.overrides);
  Pipeline p(m.adapter, m.backends, m.bank, InferenceOptions::from(m.config));
  std::optional<Image> guidance;
  if (!a.guidance.empty()) guidance = read_png(a.guidance);
  if (a.mode == GenerationMode::img && !guidance) throw ConfigError("cli", "--mode img needs --guidance");
  Rng rng(a.seed);
  auto out = p.generate(a.mode, a.prompt, a.n, rng, guidance ? &*guidance : nullptr);
  save_image_batch(out.images, a.out, "img");
  if (a.grid) write_png((fs::path(a.out) / "grid.png").string(), contact_sheet(out.images));
  return out;
}

struct EvaluateArgs {
  std::string checkpoint;
  std::string bank;
  std::string captions;
  std::string out;
  Config overrides;
  std::vector<GenerationMode> modes{GenerationMode::full, GenerationMode::pt, GenerationMode::img};
  int images_per_caption = 25;
  int negatives_per_query = 99;
  std::string negatives_dir;  // empty: sample from the toy world
  int toy_pool = 1000;
  std::uint64_t seed = 0;
};

inline std::vector<ModelReport> evaluate_command(const EvaluateArgs& a) {
  const auto m = load_model(a.checkpoint, a.bank, a.overrides);
  Pipeline p(m.adapter, m.backends, m.bank, InferenceOptions::from(m.config));
  EvalProtocol protocol;
  protocol.captions = load_captions(a.captions);
  protocol.images_per_caption = a.images_per_caption;
  protocol.negatives_per_query = a.negatives_per_query;
  protocol.seed = a.seed;

  Mat<float> negatives;
  ImageBatch<float> guidance;
  if (!a.negatives_dir.empty()) {
    const auto dir = load_image_dir(a.negatives_dir, m.backends.embedder->image_shape());
    negatives = m.backends.embedder->embed_images(dir.images.pixels);
    guidance = dir.images;
  } else {
    if (!m.backends.world) throw ConfigError("evaluation", "non-toy backends need a negatives directory");
    Rng rng(derive_seed(a.seed, 83));
    guidance = m.backends.world->sample_batch(rng, a.toy_pool);
    negatives = m.backends.embedder->embed_images(guidance.pixels);
  }

  std::vector<ModelReport> rows;
  for (auto mode : a.modes) {
    const std::string name = mode == GenerationMode::full ? "Ours" : mode == GenerationMode::pt ? "Ours (Pt)" : "Ours (Img)";
    rows.push_back(evaluate_mode(p, mode, name, protocol, negatives, &guidance));
  }
  fs::create_directories(a.out);
  write_text(fs::path(a.out) / "report.txt", format_table(rows));
  write_text(fs::path(a.out) / "accuracy.csv", format_accuracy_csv(rows));
  write_text(fs::path(a.out) / "diversity.csv", format_diversity_csv(rows));
  return rows;
}

struct NnReportArgs {
  Config config;
  std::string bank;
  std::string images;
  std::string out;
  int top = 5;
  bool grid = false;
  std::string bank_images;  // bank image directory, for the contact sheet
};

inline std::string nn_report_command(const NnReportArgs& a) {
  const auto backends = make_backends<float>(a.config);
  const auto bank = load_bank(a.bank);
  const auto dir = load_image_dir(a.images, backends.embedder->image_shape());
  const Mat<float> emb = backends.embedder->embed_images(dir.images.pixels);
  const auto report = nn_report(emb, bank, a.top);
  const std::string csv = format_nn_report(dir.ids, report);
  fs::create_directories(a.out);
  write_text(fs::path(a.out) / "nn_report.csv", csv);
  if (a.grid) {
    require(!a.bank_images.empty(), "cli", "--grid needs --bank-images");
    const auto bank_dir = load_image_dir(a.bank_images, backends.embedder->image_shape());
    std::map<std::string, int> by_id;
    for (std::size_t i = 0; i < bank_dir.ids.size(); ++i) by_id[bank_dir.ids[i]] = static_cast<int>(i);
    const int cols = a.top + 1;
    ImageBatch<float> sheet{dir.images.shape, Mat<float>::Constant(dir.images.shape.pixel_count(), dir.images.size() * cols, 1.0f)};
    for (int i = 0; i < dir.images.size(); ++i) {
      sheet.pixels.col(i * cols) = dir.images.pixels.col(i);
      for (int r = 0; r < a.top; ++r) {
        auto it = by_id.find(report[static_cast<std::size_t>(i)][static_cast<std::size_t>(r)].id);
        if (it != by_id.end()) sheet.pixels.col(i * cols + 1 + r) = bank_dir.images.pixels.col(it->second);
      }
    }
    write_png((fs::path(a.out) / "nn_grid.png").string(), contact_sheet(sheet, cols));
  }
  return csv;
}

struct AblateArgs {
  Config config;
  std::string data;
  std::string captions;
  std::string out;
  int images_per_caption = 10;
  int negatives_per_query = 99;
  int toy_pool = 1000;
  std::uint64_t seed = 0;
};

/// Trains the four architecture variants on the same data and writes the
/// comparison report.
inline std::vector<ModelReport> ablate_command(const AblateArgs& a) {
  const auto backends = make_backends<float>(a.config);
  require(backends.world != nullptr, "cli", "ablation runs on the toy backends");
  const auto dir = load_image_dir(a.data, backends.embedder->image_shape());
  ToyBenchmark bench;
  bench.train_images = dir.images;
  bench.bank = std::make_shared<const EmbeddingBank>(build_bank(*backends.embedder, dir.images, dir.ids));
  Rng rng(derive_seed(a.seed, 83));
  bench.guidance_images = backends.world->sample_batch(rng, a.toy_pool, &bench.guidance_factors);
  bench.negative_embeddings = backends.embedder->embed_images(bench.guidance_images.pixels);
  EvalProtocol protocol;
  protocol.captions = load_captions(a.captions);
  protocol.images_per_caption = a.images_per_caption;
  protocol.negatives_per_query = a.negatives_per_query;
  protocol.seed = a.seed;
  const auto rows = run_ablation(a.config, backends, bench, protocol);
  fs::create_directories(a.out);
  write_text(fs::path(a.out) / "ablation.txt", format_table(rows));
  write_text(fs::path(a.out) / "accuracy.csv", format_accuracy_csv(rows));
  write_text(fs::path(a.out) / "diversity.csv", format_diversity_csv(rows));
  return rows;
}

}  // namespace latentbridge::commands
