#pragma once

#include <algorithm>
#include <filesystem>
#include <string>
#include <vector>

#include "latentbridge/io/png.hpp"

namespace latentbridge {

struct ImageDirectory {
  ImageBatch<float> images;
  std::vector<std::string> ids;  // file stems
};

/// PNG files directly under `dir`, sorted by name.
inline std::vector<std::filesystem::path> list_pngs(const std::string& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw InputError("io", "'" + dir + "' is not a directory");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    auto ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return std::tolower(ch); });
    if (ext == ".png") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

inline ImageDirectory load_image_dir(const std::string& dir, const ImageShape& shape) {
  const auto files = list_pngs(dir);
  if (files.empty()) throw InputError("io", "no PNG images in '" + dir + "'");
  ImageDirectory out;
  out.images.shape = shape;
  out.images.pixels.resize(shape.pixel_count(), static_cast<Eigen::Index>(files.size()));
  for (std::size_t i = 0; i < files.size(); ++i) {
    const Image img = read_png(files[i].string());
    if (!(img.shape == shape)) {
      throw InputError("io", "'" + files[i].filename().string() + "' is " + img.shape.str() + ", expected " + shape.str());
    }
    out.images.pixels.col(static_cast<Eigen::Index>(i)) = img.pixels;
    out.ids.push_back(files[i].stem().string());
  }
  return out;
}

/// Writes `<dir>/<prefix>_NNNN.png` per image and returns the paths.
inline std::vector<std::string> save_image_batch(const ImageBatch<float>& batch, const std::string& dir,
                                                 const std::string& prefix = "img") {
  std::filesystem::create_directories(dir);
  std::vector<std::string> paths;
  for (int i = 0; i < batch.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "_%04d.png", i);
    paths.push_back((std::filesystem::path(dir) / (prefix + name)).string());
    write_png(paths.back(), batch.image(i));
  }
  return paths;
}

}  // namespace latentbridge
