#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <type_traits>

#include "mvs/params.hpp"

namespace mvs {

// Little-endian primitive IO shared by the checkpoint and frame-feature
// formats.
namespace binary {

template <typename T>
void write_le(std::ostream& os, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  std::array<char, sizeof(T)> bytes;
  std::memcpy(bytes.data(), &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    std::reverse(bytes.begin(), bytes.end());
  }
  os.write(bytes.data(), sizeof(T));
}

template <typename T>
T read_le(std::istream& is, const char* what) {
  static_assert(std::is_trivially_copyable_v<T>);
  std::array<char, sizeof(T)> bytes;
  if (!is.read(bytes.data(), sizeof(T))) throw FormatError(std::string("truncated ") + what);
  if constexpr (std::endian::native == std::endian::big) {
    std::reverse(bytes.begin(), bytes.end());
  }
  T value;
  std::memcpy(&value, bytes.data(), sizeof(T));
  return value;
}

inline std::string read_bytes(std::istream& is, std::size_t n, const char* what) {
  std::string s(n, '\0');
  if (n && !is.read(s.data(), static_cast<std::streamsize>(n))) {
    throw FormatError(std::string("truncated ") + what);
  }
  return s;
}

}  // namespace binary

inline constexpr std::array<char, 8> kCheckpointMagic{'M', 'V', 'S', 'C', 'K', 'P', 'T', '\0'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  std::string metadata;  // free-form text, the model config as JSON in practice
  std::map<std::string, Tensor> tensors;
};

// Layout (all integers little-endian):
//   magic "MVSCKPT\0" | u32 version | u32 metadata_len | metadata bytes
//   u32 tensor_count, then per tensor:
//   u32 name_len | name bytes | u32 rank | u64 dims[rank] | f64 values[prod(dims)]
inline void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw FormatError("cannot open " + path.string() + " for writing");
  os.write(kCheckpointMagic.data(), kCheckpointMagic.size());
  binary::write_le<std::uint32_t>(os, kCheckpointVersion);
  binary::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(ckpt.metadata.size()));
  os.write(ckpt.metadata.data(), static_cast<std::streamsize>(ckpt.metadata.size()));
  binary::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& [name, t] : ckpt.tensors) {
    binary::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    binary::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) binary::write_le<std::uint64_t>(os, d);
    for (double v : t.data()) binary::write_le<double>(os, v);
  }
  if (!os) throw FormatError("failed writing " + path.string());
}

inline Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open checkpoint " + path.string());
  std::array<char, 8> magic{};
  if (!is.read(magic.data(), magic.size()) || magic != kCheckpointMagic) {
    throw FormatError(path.string() + " is not a checkpoint");
  }
  const auto version = binary::read_le<std::uint32_t>(is, "version");
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ckpt;
  const auto meta_len = binary::read_le<std::uint32_t>(is, "metadata length");
  ckpt.metadata = binary::read_bytes(is, meta_len, "metadata");
  const auto count = binary::read_le<std::uint32_t>(is, "tensor count");
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = binary::read_le<std::uint32_t>(is, "name length");
    std::string name = binary::read_bytes(is, name_len, "tensor name");
    const auto rank = binary::read_le<std::uint32_t>(is, "rank");
    if (rank == 0 || rank > 8) throw FormatError("bad rank for " + name);
    Shape shape(rank);
    for (auto& d : shape) d = static_cast<std::size_t>(binary::read_le<std::uint64_t>(is, "dimension"));
    std::size_t total = 1;
    for (std::size_t d : shape) {
      if (d == 0 || d > (std::size_t{1} << 30) / total) throw FormatError("implausible shape for " + name);
      total *= d;
    }
    std::vector<double> values(total);
    for (auto& v : values) v = binary::read_le<double>(is, "tensor payload");
    ckpt.tensors.emplace(std::move(name), Tensor(std::move(shape), std::move(values)));
  }
  return ckpt;
}

inline Checkpoint make_checkpoint(const ParamSet& params, std::string metadata) {
  return Checkpoint{std::move(metadata), params.snapshot()};
}

}  // namespace mvs
