#pragma once

#include <optional>
#include <string>

#include "latentbridge/adapter/cvae.hpp"
#include "latentbridge/core/binary_io.hpp"
#include "latentbridge/core/config.hpp"

namespace latentbridge {

// Layout: "CVCK" | u32 version | u64 config digest | u32 config length |
//         canonical config text | u32 parameter count |
//         per parameter: u16 name length | name | u32 rank | rank x u32 dims |
//                        prod(dims) x f32, row-major
constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  Config config;
  CvaeAdapter<float> adapter;
};

inline std::vector<char> serialize_checkpoint(const Config& config, const CvaeAdapter<float>& adapter) {
  ByteWriter w;
  const std::string text = config.canonical();
  w.put_bytes("CVCK");
  w.put<std::uint32_t>(kCheckpointVersion);
  w.put<std::uint64_t>(config.digest());
  w.put<std::uint32_t>(static_cast<std::uint32_t>(text.size()));
  w.put_bytes(text);
  const auto params = adapter.parameters();
  w.put<std::uint32_t>(static_cast<std::uint32_t>(params.size()));
  for (const auto* p : params) {
    w.put<std::uint16_t>(static_cast<std::uint16_t>(p->name.size()));
    w.put_bytes(p->name);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(p->shape.size()));
    for (int d : p->shape) w.put<std::uint32_t>(static_cast<std::uint32_t>(d));
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> row_major = p->value;
    w.put_floats(row_major.data(), static_cast<std::size_t>(row_major.size()));
  }
  return w.bytes();
}

inline void save_checkpoint(const Config& config, const CvaeAdapter<float>& adapter, const std::string& path) {
  ByteWriter w;
  const auto bytes = serialize_checkpoint(config, adapter);
  w.put_bytes(std::string_view(bytes.data(), bytes.size()));
  w.write_file(path, "checkpoint");
}

inline Checkpoint parse_checkpoint(std::vector<char> bytes) {
  ByteReader r(std::move(bytes), "checkpoint");
  if (r.get_bytes(4, "magic") != "CVCK") throw FormatError("checkpoint", "bad magic bytes (expected 'CVCK')", 0);
  const auto version_offset = r.offset();
  const auto version = r.get<std::uint32_t>("version");
  if (version != kCheckpointVersion) {
    throw FormatError("checkpoint", "unsupported version " + std::to_string(version), version_offset);
  }
  const auto digest = r.get<std::uint64_t>("config digest");
  const auto text_len = r.get<std::uint32_t>("config length");
  const auto text_offset = r.offset();
  const std::string text = r.get_bytes(text_len, "config text");
  Config config;
  try {
    config = Config::parse(text);
  } catch (const ConfigError& e) {
    throw FormatError("checkpoint", std::string("embedded config unreadable: ") + e.what(), text_offset);
  }
  if (config.digest() != digest) throw FormatError("checkpoint", "config digest mismatch", text_offset);

  std::optional<CvaeAdapter<float>> adapter;
  try {
    adapter.emplace(AdapterConfig::from(config));
  } catch (const Error& e) {
    throw FormatError("checkpoint", std::string("embedded config invalid: ") + e.what(), text_offset);
  }
  auto params = adapter->parameters();
  const auto count_offset = r.offset();
  const auto count = r.get<std::uint32_t>("parameter count");
  if (count != params.size()) {
    throw FormatError("checkpoint",
                      "config implies " + std::to_string(params.size()) + " parameters, file has " + std::to_string(count),
                      count_offset);
  }
  for (auto* p : params) {
    const auto entry_offset = r.offset();
    const auto name_len = r.get<std::uint16_t>("parameter name length");
    const std::string name = r.get_bytes(name_len, "parameter name");
    if (name != p->name) {
      throw FormatError("checkpoint", "expected parameter '" + p->name + "', found '" + name + "'", entry_offset);
    }
    const auto rank_offset = r.offset();
    const auto rank = r.get<std::uint32_t>("parameter rank");
    if (rank != p->shape.size()) throw FormatError("checkpoint", "rank mismatch for '" + name + "'", rank_offset);
    for (int d : p->shape) {
      const auto dim_offset = r.offset();
      if (r.get<std::uint32_t>("parameter dim") != static_cast<std::uint32_t>(d)) {
        throw FormatError("checkpoint", "shape mismatch for '" + name + "'", dim_offset);
      }
    }
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> row_major(p->value.rows(), p->value.cols());
    const auto values_offset = r.offset();
    r.get_floats(row_major.data(), static_cast<std::size_t>(row_major.size()), "parameter values");
    if (!row_major.allFinite()) throw FormatError("checkpoint", "non-finite values in '" + name + "'", values_offset);
    p->value = row_major;
  }
  if (!r.at_end()) r.fail("trailing bytes after the last parameter");
  return Checkpoint{std::move(config), std::move(*adapter)};
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("checkpoint", "cannot open '" + path + "'");
  std::vector<char> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_checkpoint(std::move(data));
}

}  // namespace latentbridge
