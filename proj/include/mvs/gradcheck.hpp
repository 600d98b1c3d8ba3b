#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "mvs/model.hpp"
#include "mvs/optim.hpp"

namespace mvs {

// A full model plus one random query/video/label triple on which the
// end-to-end loss is differentiated both ways.
struct GradCheckProblem {
  Model model;
  TokenSequence tokens;
  FrameFeatureMatrix frames;
  std::vector<int> labels;

  Var loss() const { return cross_entropy(model.logits(tokens, frames), labels); }
};

inline ModelConfig gradcheck_config(const std::string& dims) {
  ModelConfig cfg;
  if (dims == "toy") {
    cfg.controller = {16, 8, 8, 16, 1, 8, 16};
    cfg.feature_dim = 8;
  } else if (dims == "small") {
    cfg.controller = {24, 16, 16, 32, 2, 12, 16};
    cfg.feature_dim = 16;
  } else {
    throw ConfigError("gradcheck dims must be toy or small");
  }
  return cfg;
}

// Parameters are redrawn at a generic point: matrices N(0, 1/fan_in), every
// vector (biases included) N(0, 0.3^2), layer-norm gains around 1. The
// training init leaves biases at exactly zero, which is a special point.
inline GradCheckProblem make_gradcheck_problem(const std::string& dims, std::uint64_t seed,
                                               std::size_t frames = 150, std::size_t num_tokens = 4) {
  ModelConfig cfg = gradcheck_config(dims);
  cfg.seed = seed;
  GradCheckProblem prob{Model(cfg), {}, {}, {}};

  std::mt19937_64 rng(seed + 1);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (auto& [name, p] : prob.model.params()) {
    Tensor& t = p.mutable_value();
    const double sd = t.rank() == 2 ? 1.0 / std::sqrt(static_cast<double>(t.cols())) : 0.3;
    const double centre = name.find("ln_gain") != std::string::npos ? 1.0 : 0.0;
    for (auto& v : t.data()) v = centre + sd * normal(rng);
  }

  Tensor raw({frames, cfg.feature_dim});
  for (auto& v : raw.data()) v = normal(rng);
  prob.frames = preprocess_frames(raw, cfg.t_max);
  prob.labels.resize(cfg.t_max);
  std::uniform_int_distribution<int> level(0, kNumRelevanceLevels - 1);
  for (auto& l : prob.labels) l = level(rng);
  std::uniform_int_distribution<std::size_t> tok(0, cfg.controller.vocab_size - 1);
  for (std::size_t i = 0; i < num_tokens; ++i) prob.tokens.ids.push_back(tok(rng));
  return prob;
}

inline GradCheckReport run_gradcheck(GradCheckProblem& prob, double tolerance, double step = 1e-5) {
  return grad_check([&] { return prob.loss(); }, prob.model.params(), tolerance, step);
}

}  // namespace mvs
