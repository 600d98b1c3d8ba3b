#pragma once

#include <string>
#include <vector>

#include "mvs/autodiff.hpp"
#include "mvs/params.hpp"

namespace mvs {

inline constexpr std::size_t kNumRelevanceLevels = 4;
inline constexpr int kDefaultSummaryThreshold = 2;

struct FusionParams {
  Var w_query;           // [D x output_dim], aligns the query vector with frame channels
  Var w_conv, b_conv;    // 1x1 convolution over channels, [D x D], [D]
  Var w_cls, b_cls;      // [4 x D], [4]

  static FusionParams init(std::size_t feature_dim, std::size_t output_dim, Initializer& init,
                           ParamSet& set, const std::string& prefix = "fusion.") {
    if (feature_dim == 0 || output_dim == 0) throw ConfigError("fusion dimensions must be positive");
    FusionParams p;
    p.w_query = init.fan_in(set, prefix + "w_query", {feature_dim, output_dim});
    p.w_conv = init.fan_in(set, prefix + "w_conv", {feature_dim, feature_dim});
    p.b_conv = init.zeros(set, prefix + "b_conv", {feature_dim});
    p.w_cls = init.fan_in(set, prefix + "w_cls", {kNumRelevanceLevels, feature_dim});
    p.b_cls = init.zeros(set, prefix + "b_cls", {kNumRelevanceLevels});
    return p;
  }
};

// Projects the query to D channels, broadcasts it over every frame, takes
// the Hadamard product with the frames and applies the 1x1 convolution
// (a shared channel map per frame). With convolution off the product is
// returned as is.
inline Var interactive_attention(const Var& z_ta, const Var& z_va, const FusionParams& params,
                                 bool convolution_on = true) {
  const std::size_t D = z_va.value().cols();
  if (params.w_query.value().rows() != D || params.w_query.value().cols() != z_ta.value().size()) {
    throw ConfigError("interactive attention: query projection " +
                      shape_string(params.w_query.shape()) + " cannot map " +
                      shape_string(z_ta.shape()) + " onto " + std::to_string(D) + " channels");
  }
  Var query = linear(z_ta, params.w_query);
  Var fused = hadamard(z_va, query);
  if (!convolution_on) return fused;
  return linear(fused, params.w_conv, params.b_conv);
}

// Raw per-frame logits over the relevance levels.
inline Var classify_frames(const Var& z_ia, const FusionParams& params) {
  return linear(z_ia, params.w_cls, params.b_cls);
}

struct SummaryResult {
  Tensor logits;  // [frames x 4]
  std::vector<int> predicted_labels;
  std::vector<std::size_t> selected_frames;
  int threshold = kDefaultSummaryThreshold;
};

// Argmax with ties going to the higher level.
inline int argmax_high(std::span<const double> row) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < row.size(); ++c) {
    if (row[c] >= row[best]) best = c;
  }
  return static_cast<int>(best);
}

inline std::vector<std::size_t> frames_at_or_above(std::span<const int> labels, int threshold) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= threshold) out.push_back(i);
  }
  return out;
}

inline SummaryResult select_summary(const Tensor& logits, int threshold = kDefaultSummaryThreshold) {
  if (threshold < 1 || threshold > 3) {
    throw ConfigError("summary threshold must be 1, 2 or 3, got " + std::to_string(threshold));
  }
  if (logits.rank() != 2 || logits.cols() != kNumRelevanceLevels) {
    throw DimensionError("summary logits must be [frames x 4], got " + shape_string(logits.shape()));
  }
  SummaryResult res;
  res.logits = logits;
  res.threshold = threshold;
  res.predicted_labels.reserve(logits.rows());
  for (std::size_t r = 0; r < logits.rows(); ++r) res.predicted_labels.push_back(argmax_high(logits.row(r)));
  res.selected_frames = frames_at_or_above(res.predicted_labels, threshold);
  return res;
}

}  // namespace mvs
