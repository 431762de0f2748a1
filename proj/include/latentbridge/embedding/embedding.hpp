#pragma once

#include <cmath>
#include <memory>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "latentbridge/core/tensor.hpp"

namespace latentbridge {

template <typename Scalar>
struct BasicEmbedding {
  Vec<Scalar> values;
  bool normalized = false;

  int dim() const { return static_cast<int>(values.size()); }

  friend bool operator==(const BasicEmbedding& a, const BasicEmbedding& b) {
    return a.normalized == b.normalized && a.values.size() == b.values.size() && a.values == b.values;
  }
};

using Embedding = BasicEmbedding<float>;

/// Unit-normalizes in double precision; zero vectors are a numeric error.
template <typename Derived>
auto unit_normalized(const Eigen::MatrixBase<Derived>& v, const char* module = "embedding") {
  using Scalar = typename Derived::Scalar;
  const double norm = v.template cast<double>().norm();
  if (!(norm > 0.0) || !std::isfinite(norm)) throw NumericError(module, "cannot normalize a zero or non-finite vector");
  return Vec<Scalar>((v.template cast<double>() / norm).template cast<Scalar>());
}

template <typename A, typename B>
double cosine_similarity(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
  require(a.size() == b.size(), "embedding", "cosine similarity of vectors with different dimensions");
  const auto ad = a.template cast<double>();
  const auto bd = b.template cast<double>();
  const double denom = ad.norm() * bd.norm();
  if (!(denom > 0.0)) throw NumericError("embedding", "cosine similarity with a zero-norm vector");
  return ad.dot(bd) / denom;
}

/// Structured text stand-in for the toy backend: "toy:a3=1,a5=-0.5".
/// Attribute indices are zero-based; values in [-1, 1].
struct AttributeDescriptor {
  std::vector<std::pair<int, double>> targets;

  static AttributeDescriptor parse(const std::string& text, int attribute_dims) {
    const std::string prefix = "toy:";
    if (text.rfind(prefix, 0) != 0) {
      throw InputError("embedding", "toy text backend expects a 'toy:aI=V,...' descriptor, got '" + text + "'");
    }
    AttributeDescriptor d;
    std::stringstream ss(text.substr(prefix.size()));
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (item.empty()) continue;
      const auto eq = item.find('=');
      if (item[0] != 'a' || eq == std::string::npos) {
        throw InputError("embedding", "malformed descriptor term '" + item + "'");
      }
      int index = -1;
      double value = 0.0;
      try {
        std::size_t used = 0;
        index = std::stoi(item.substr(1, eq - 1), &used);
        if (used != eq - 1) throw std::invalid_argument("index");
        const std::string rhs = item.substr(eq + 1);
        value = std::stod(rhs, &used);
        if (used != rhs.size()) throw std::invalid_argument("value");
      } catch (const std::logic_error&) {
        throw InputError("embedding", "malformed descriptor term '" + item + "'");
      }
      if (index < 0 || index >= attribute_dims) {
        throw InputError("embedding", "attribute index " + std::to_string(index) + " out of range");
      }
      if (!(value >= -1.0 && value <= 1.0)) {
        throw InputError("embedding", "attribute value must lie in [-1, 1] in '" + item + "'");
      }
      for (const auto& [i, v] : d.targets) {
        if (i == index) throw InputError("embedding", "attribute a" + std::to_string(index) + " given twice");
      }
      d.targets.emplace_back(index, value);
    }
    if (d.targets.empty()) throw InputError("embedding", "empty attribute descriptor");
    return d;
  }

  /// Full attribute vector with unspecified entries zeroed.
  Vec<double> partial_vector(int attribute_dims) const {
    Vec<double> a = Vec<double>::Zero(attribute_dims);
    for (const auto& [i, v] : targets) a[i] = v;
    return a;
  }

  std::string str() const {
    std::string s = "toy:";
    for (std::size_t k = 0; k < targets.size(); ++k) {
      if (k) s += ",";
      std::ostringstream v;
      v << targets[k].second;
      s += "a" + std::to_string(targets[k].first) + "=" + v.str();
    }
    return s;
  }
};

/// Frozen joint image/text embedder.
template <typename Scalar>
class EmbeddingBackend {
 public:
  virtual ~EmbeddingBackend() = default;

  virtual int dim() const = 0;
  virtual ImageShape image_shape() const = 0;
  virtual std::string source_tag() const = 0;
  virtual std::uint64_t parameter_checksum() const = 0;

  /// pixels: one image per column -> one embedding per column.
  virtual Mat<Scalar> embed_images(const Mat<Scalar>& pixels) const = 0;

  /// Vector-Jacobian product of embed_images; needed by the cycle loss.
  virtual Mat<Scalar> embed_images_vjp(const Mat<Scalar>& pixels, const Mat<Scalar>& grad) const {
    (void)pixels;
    (void)grad;
    throw ConfigError("embedding", "backend '" + source_tag() + "' is not differentiable");
  }

  virtual BasicEmbedding<Scalar> embed_text(const std::string& text) const = 0;

  BasicEmbedding<Scalar> embed_image(const BasicImage<Scalar>& image) const {
    if (!(image.shape == image_shape())) {
      throw InputError("embedding", "image shape " + image.shape.str() + " does not match backend shape " +
                                        image_shape().str());
    }
    Mat<Scalar> out = embed_images(image.pixels);
    return {Vec<Scalar>(out.col(0)), true};
  }
};

}  // namespace latentbridge
