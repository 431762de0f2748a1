#pragma once

#include <string>
#include <unordered_set>
#include <vector>

#include "latentbridge/core/binary_io.hpp"
#include "latentbridge/embedding/embedding.hpp"

namespace latentbridge {

/// Immutable collection of unit-normalized image embeddings with ids.
/// One vector per column.
class EmbeddingBank {
 public:
  static constexpr std::uint32_t kVersion = 1;
  static constexpr double kUnitTolerance = 1e-5;

  EmbeddingBank(std::vector<std::string> ids, Mat<float> vectors, std::string source_tag)
      : ids_(std::move(ids)), vectors_(std::move(vectors)), source_tag_(std::move(source_tag)) {
    require(!ids_.empty(), "bank", "a bank needs at least one entry");
    require(vectors_.cols() == static_cast<Eigen::Index>(ids_.size()), "bank", "id count and vector count differ");
    require(vectors_.rows() > 0, "bank", "bank dimension must be positive");
    std::unordered_set<std::string> seen;
    for (const auto& id : ids_) {
      if (!seen.insert(id).second) throw InputError("bank", "duplicate id '" + id + "'");
      require(id.size() <= 0xFFFF, "bank", "id longer than 65535 bytes");
    }
    for (Eigen::Index j = 0; j < vectors_.cols(); ++j) {
      const double n = vectors_.col(j).cast<double>().norm();
      if (!(std::abs(n - 1.0) <= kUnitTolerance)) {
        throw InputError("bank", "entry '" + ids_[static_cast<std::size_t>(j)] + "' is not unit-normalized");
      }
    }
  }

  int dim() const { return static_cast<int>(vectors_.rows()); }
  int size() const { return static_cast<int>(vectors_.cols()); }
  const std::vector<std::string>& ids() const { return ids_; }
  const std::string& id(int i) const { return ids_[static_cast<std::size_t>(i)]; }
  const Mat<float>& vectors() const { return vectors_; }
  const std::string& source_tag() const { return source_tag_; }

  Embedding entry(int i) const { return {Vec<float>(vectors_.col(i)), true}; }

  /// Bitwise equality of dimension, ids and vectors (the persisted content).
  friend bool operator==(const EmbeddingBank& a, const EmbeddingBank& b) {
    return a.ids_ == b.ids_ && a.vectors_.rows() == b.vectors_.rows() && a.vectors_.cols() == b.vectors_.cols() &&
           std::memcmp(a.vectors_.data(), b.vectors_.data(), sizeof(float) * static_cast<std::size_t>(a.vectors_.size())) == 0;
  }

 private:
  std::vector<std::string> ids_;
  Mat<float> vectors_;
  std::string source_tag_;
};

/// Embeds each image, normalizes, and keeps input order.
template <typename Scalar>
EmbeddingBank build_bank(const EmbeddingBackend<Scalar>& backend, const ImageBatch<Scalar>& images,
                         std::vector<std::string> ids) {
  require(images.size() > 0, "bank", "cannot build a bank from zero images");
  require(static_cast<std::size_t>(images.size()) == ids.size(), "bank", "image and id counts differ");
  require(images.shape == backend.image_shape(), "bank", "image shape does not match the embedding backend");
  Mat<Scalar> raw = backend.embed_images(images.pixels);
  Mat<float> vectors(raw.rows(), raw.cols());
  for (Eigen::Index j = 0; j < raw.cols(); ++j) vectors.col(j) = unit_normalized(raw.col(j), "bank").template cast<float>();
  return EmbeddingBank(std::move(ids), std::move(vectors), backend.source_tag());
}

// Layout: "EBNK" | u32 version | u32 dim | u64 count |
//         count x (u16 id_len | id bytes | dim x f32)
inline std::vector<char> serialize_bank(const EmbeddingBank& bank) {
  ByteWriter w;
  w.put_bytes("EBNK");
  w.put<std::uint32_t>(EmbeddingBank::kVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(bank.dim()));
  w.put<std::uint64_t>(static_cast<std::uint64_t>(bank.size()));
  for (int i = 0; i < bank.size(); ++i) {
    w.put<std::uint16_t>(static_cast<std::uint16_t>(bank.id(i).size()));
    w.put_bytes(bank.id(i));
    w.put_floats(bank.vectors().col(i).data(), static_cast<std::size_t>(bank.dim()));
  }
  return w.bytes();
}

inline EmbeddingBank parse_bank(std::vector<char> bytes, std::string source_tag = "file") {
  ByteReader r(std::move(bytes), "bank");
  if (r.get_bytes(4, "magic") != "EBNK") {
    throw FormatError("bank", "bad magic bytes (expected 'EBNK')", 0);
  }
  const auto version_offset = r.offset();
  const auto version = r.get<std::uint32_t>("version");
  if (version != EmbeddingBank::kVersion) {
    throw FormatError("bank", "unsupported version " + std::to_string(version), version_offset);
  }
  const auto dim_offset = r.offset();
  const auto dim = r.get<std::uint32_t>("dim");
  if (dim == 0 || dim > (1u << 20)) throw FormatError("bank", "invalid dimension " + std::to_string(dim), dim_offset);
  const auto count_offset = r.offset();
  const auto count = r.get<std::uint64_t>("count");
  if (count == 0) throw FormatError("bank", "bank declares zero entries", count_offset);
  // Each record needs at least 2 + 4*dim bytes; reject absurd counts before allocating.
  if (count > r.remaining() / (2 + 4ull * dim) + 1) {
    throw FormatError("bank", "truncated payload: declared " + std::to_string(count) + " records", r.offset());
  }

  std::vector<std::string> ids;
  ids.reserve(count);
  Mat<float> vectors(dim, static_cast<Eigen::Index>(count));
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto len = r.get<std::uint16_t>("id length");
    ids.push_back(r.get_bytes(len, "id bytes"));
    r.get_floats(vectors.col(static_cast<Eigen::Index>(i)).data(), dim, "embedding values");
  }
  if (!r.at_end()) r.fail("trailing bytes after the last record");
  try {
    return EmbeddingBank(std::move(ids), std::move(vectors), std::move(source_tag));
  } catch (const InputError& e) {
    throw FormatError("bank", std::string("invalid content: ") + e.what(), r.offset());
  }
}

inline void save_bank(const EmbeddingBank& bank, const std::string& path) {
  ByteWriter w;
  const auto bytes = serialize_bank(bank);
  w.put_bytes(std::string_view(bytes.data(), bytes.size()));
  w.write_file(path, "bank");
}

inline EmbeddingBank load_bank(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("bank", "cannot open '" + path + "'");
  std::vector<char> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_bank(std::move(data), "file:" + path);
}

}  // namespace latentbridge
