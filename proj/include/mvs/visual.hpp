#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>

#include "mvs/autodiff.hpp"
#include "mvs/checkpoint.hpp"
#include "mvs/params.hpp"

namespace mvs {

inline constexpr std::size_t kDefaultMaxFrames = 199;

// Per-frame features padded to t_max rows by cyclic repetition.
struct FrameFeatureMatrix {
  Tensor features;  // [t_max x D]
  std::size_t original_length = 0;

  std::size_t t_max() const noexcept { return features.rows(); }
  std::size_t feature_dim() const noexcept { return features.cols(); }
};

// Output row i is raw row (i mod T).
inline FrameFeatureMatrix preprocess_frames(const Tensor& raw, std::size_t t_max = kDefaultMaxFrames) {
  if (raw.empty()) throw LengthError("video has no frames");
  if (raw.rank() != 2) throw DimensionError("frame features must be [T x D], got " + shape_string(raw.shape()));
  const std::size_t T = raw.rows(), D = raw.cols();
  if (T > t_max) {
    throw LengthError("video has " + std::to_string(T) + " frames, limit is " + std::to_string(t_max));
  }
  FrameFeatureMatrix out{Tensor({t_max, D}), T};
  for (std::size_t i = 0; i < t_max; ++i) {
    auto src = raw.row(i % T);
    std::copy(src.begin(), src.end(), out.features.row(i).begin());
  }
  return out;
}

struct VisualParams {
  Var w_va, b_va;  // [D x D], [D]

  static VisualParams init(std::size_t feature_dim, Initializer& init, ParamSet& set,
                           const std::string& prefix = "visual.") {
    if (feature_dim == 0) throw ConfigError("feature_dim must be positive");
    return {init.fan_in(set, prefix + "w_va", {feature_dim, feature_dim}),
            init.zeros(set, prefix + "b_va", {feature_dim})};
  }
};

// Per frame: sigmoid(W v_i + b) (.) v_i, weights shared across frames.
inline Var visual_attention(const Var& frames, const VisualParams& params) {
  return hadamard(frames, sigmoid(linear(frames, params.w_va, params.b_va)));
}

// Frame-feature file: magic "MVSF" | u32 version (1) | u32 T | u32 D |
// f64 values[T * D] row-major, all little-endian.
inline constexpr std::array<char, 4> kFeatureMagic{'M', 'V', 'S', 'F'};
inline constexpr std::uint32_t kFeatureVersion = 1;

inline void write_frame_features(const std::filesystem::path& path, const Tensor& raw) {
  if (raw.rank() != 2) throw DimensionError("frame features must be [T x D]");
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw FormatError("cannot open " + path.string() + " for writing");
  os.write(kFeatureMagic.data(), kFeatureMagic.size());
  binary::write_le<std::uint32_t>(os, kFeatureVersion);
  binary::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(raw.rows()));
  binary::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(raw.cols()));
  for (double v : raw.data()) binary::write_le<double>(os, v);
  if (!os) throw FormatError("failed writing " + path.string());
}

inline Tensor read_frame_features(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open frame features " + path.string());
  std::array<char, 4> magic{};
  if (!is.read(magic.data(), magic.size()) || magic != kFeatureMagic) {
    throw FormatError(path.string() + " is not a frame-feature file");
  }
  const auto version = binary::read_le<std::uint32_t>(is, "version");
  if (version != kFeatureVersion) throw FormatError("unsupported feature file version");
  const auto T = binary::read_le<std::uint32_t>(is, "frame count");
  const auto D = binary::read_le<std::uint32_t>(is, "feature dim");
  if (T == 0) throw LengthError(path.string() + " has no frames");
  if (D == 0) throw FormatError(path.string() + " has zero feature dim");
  std::vector<double> values(static_cast<std::size_t>(T) * D);
  for (auto& v : values) v = binary::read_le<double>(is, "feature payload");
  return Tensor({T, D}, std::move(values));
}

}  // namespace mvs
