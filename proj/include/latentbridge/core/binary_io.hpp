#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "latentbridge/core/errors.hpp"

namespace latentbridge {

static_assert(std::endian::native == std::endian::little,
              "binary formats are written with little-endian memcpy");

/// Append-only little-endian byte writer.
class ByteWriter {
 public:
  template <typename T>
  void put(T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    const auto* p = reinterpret_cast<const char*>(&value);
    bytes_.insert(bytes_.end(), p, p + sizeof(T));
  }

  void put_bytes(std::string_view data) { bytes_.insert(bytes_.end(), data.begin(), data.end()); }

  void put_floats(const float* data, std::size_t count) {
    const auto* p = reinterpret_cast<const char*>(data);
    bytes_.insert(bytes_.end(), p, p + count * sizeof(float));
  }

  const std::vector<char>& bytes() const { return bytes_; }

  void write_file(const std::string& path, const char* module) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError(module, "cannot open '" + path + "' for writing");
    out.write(bytes_.data(), static_cast<std::streamsize>(bytes_.size()));
    if (!out) throw InputError(module, "write to '" + path + "' failed");
  }

 private:
  std::vector<char> bytes_;
};

/// Bounds-checked reader; every failure reports the byte offset.
class ByteReader {
 public:
  ByteReader(std::vector<char> bytes, const char* module) : bytes_(std::move(bytes)), module_(module) {}

  static ByteReader from_file(const std::string& path, const char* module) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError(module, "cannot open '" + path + "'");
    std::vector<char> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return ByteReader(std::move(data), module);
  }

  template <typename T>
  T get(const char* what) {
    need(sizeof(T), what);
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  std::string get_bytes(std::size_t count, const char* what) {
    need(count, what);
    std::string s(bytes_.data() + pos_, count);
    pos_ += count;
    return s;
  }

  void get_floats(float* dst, std::size_t count, const char* what) {
    need(count * sizeof(float), what);
    std::memcpy(dst, bytes_.data() + pos_, count * sizeof(float));
    pos_ += count * sizeof(float);
  }

  std::uint64_t offset() const { return pos_; }
  bool at_end() const { return pos_ == bytes_.size(); }
  std::size_t remaining() const { return bytes_.size() - pos_; }

  [[noreturn]] void fail(const std::string& message) const { throw FormatError(module_, message, pos_); }

 private:
  void need(std::size_t count, const char* what) const {
    if (bytes_.size() - pos_ < count) {
      throw FormatError(module_, std::string("truncated payload while reading ") + what, pos_);
    }
  }

  std::vector<char> bytes_;
  std::size_t pos_ = 0;
  const char* module_;
};

/// 64-bit FNV-1a.
class Fnv1a {
 public:
  void update(const void* data, std::size_t size) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < size; ++i) {
      state_ ^= p[i];
      state_ *= 0x100000001B3ULL;
    }
  }
  void update(std::string_view s) { update(s.data(), s.size()); }
  std::uint64_t digest() const { return state_; }

 private:
  std::uint64_t state_ = 0xCBF29CE484222325ULL;
};

}  // namespace latentbridge
