#pragma once

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "latentbridge/latentbridge.hpp"

namespace lbtest {

using namespace latentbridge;

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("latentbridge_" + tag + "_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "_" +
             std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  std::string file(const std::string& name) const { return (path_ / name).string(); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline std::vector<char> read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_bytes(const std::string& path, const std::vector<char>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

/// Central difference of f at x along coordinate (i, j).
inline double central_difference(const std::function<double()>& f, double& x, double h) {
  const double saved = x;
  x = saved + h;
  const double up = f();
  x = saved - h;
  const double down = f();
  x = saved;
  return (up - down) / (2.0 * h);
}

inline double relative_error(double analytic, double numeric) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-12});
  return std::abs(analytic - numeric) / scale;
}

/// Small adapter config for fast tests (tiny conv branch and MLPs).
inline AdapterConfig small_adapter_config(EncoderMode mode = EncoderMode::full, bool variational = true) {
  AdapterConfig a;
  a.image = {3, 8, 8};
  a.context_dim = 16;
  a.feature_dim = 12;
  a.latent_dim = 6;
  a.hidden_width = 10;
  a.conv_channels = {4, 6};
  a.offset = {1, 8, LatentSpace::flat};
  a.encoder_mode = mode;
  a.variational = variational;
  a.seed = 3;
  return a;
}

/// Toy backends sized to match small_adapter_config.
inline Config small_world_config() {
  Config c;
  c.set("image.height", "8");
  c.set("image.width", "8");
  c.set("embedding.dim", "16");
  c.set("generator.latent_dim", "8");
  c.set("model.feature_dim", "12");
  c.set("model.latent_dim", "6");
  c.set("model.hidden_width", "10");
  c.set("model.conv_channels", "4,6");
  c.set("model.seed", "3");
  return c;
}

/// Replaces the zero-initialized last decoder layer with small random values.
template <typename Scalar>
void randomize_decoder_head(CvaeAdapter<Scalar>& adapter, std::uint64_t seed, double scale = 0.1) {
  Rng rng(seed);
  auto& head = adapter.decoder_head();
  head.weight.value = standard_normal<Scalar>(rng, head.weight.value.rows(), head.weight.value.cols()) *
                      static_cast<Scalar>(scale);
  head.bias.value = standard_normal<Scalar>(rng, head.bias.value.rows(), 1) * static_cast<Scalar>(scale);
}

}  // namespace lbtest
