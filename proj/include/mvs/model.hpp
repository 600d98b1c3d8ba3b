#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "json.hpp"
#include "mvs/checkpoint.hpp"
#include "mvs/controller.hpp"
#include "mvs/fusion.hpp"
#include "mvs/visual.hpp"

namespace mvs {

// Ablation switches; "off" turns the corresponding stage into an identity.
struct AttentionFlags {
  bool textual = true;
  bool visual = true;
  bool interactive = true;

  friend bool operator==(const AttentionFlags&, const AttentionFlags&) = default;
};

struct ModelConfig {
  ControllerConfig controller;
  std::size_t feature_dim = 32;
  std::size_t t_max = kDefaultMaxFrames;
  AttentionFlags attention;
  double init_std = 0.02;
  std::uint64_t seed = 0;

  void validate() const {
    controller.validate();
    if (feature_dim == 0) throw ConfigError("feature_dim must be positive");
    if (t_max == 0) throw ConfigError("t_max must be positive");
    if (!(init_std > 0.0)) throw ConfigError("init_std must be positive");
  }
};

inline nlohmann::json to_json(const ModelConfig& c) {
  return {{"controller",
           {{"vocab_size", c.controller.vocab_size},
            {"embed_dim", c.controller.embed_dim},
            {"hidden_dim", c.controller.hidden_dim},
            {"ffn_dim", c.controller.ffn_dim},
            {"num_blocks", c.controller.num_blocks},
            {"output_dim", c.controller.output_dim},
            {"max_tokens", c.controller.max_tokens}}},
          {"feature_dim", c.feature_dim},
          {"t_max", c.t_max},
          {"attention",
           {{"textual", c.attention.textual},
            {"visual", c.attention.visual},
            {"interactive", c.attention.interactive}}},
          {"init_std", c.init_std},
          {"seed", c.seed}};
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
  try {
    ModelConfig c;
    const auto& cc = j.at("controller");
    c.controller.vocab_size = cc.at("vocab_size").get<std::size_t>();
    c.controller.embed_dim = cc.at("embed_dim").get<std::size_t>();
    c.controller.hidden_dim = cc.at("hidden_dim").get<std::size_t>();
    c.controller.ffn_dim = cc.at("ffn_dim").get<std::size_t>();
    c.controller.num_blocks = cc.at("num_blocks").get<std::size_t>();
    c.controller.output_dim = cc.at("output_dim").get<std::size_t>();
    c.controller.max_tokens = cc.at("max_tokens").get<std::size_t>();
    c.feature_dim = j.at("feature_dim").get<std::size_t>();
    c.t_max = j.at("t_max").get<std::size_t>();
    const auto& a = j.at("attention");
    c.attention = {a.at("textual").get<bool>(), a.at("visual").get<bool>(),
                   a.at("interactive").get<bool>()};
    c.init_std = j.at("init_std").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.validate();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad model config: ") + e.what());
  }
}

// The full query + video -> per-frame logits pipeline. Parameters are
// shared graph leaves, so a Model is move-only.
class Model {
 public:
  explicit Model(ModelConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    Initializer init(cfg_.seed, cfg_.init_std);
    controller_ = ControllerParams::init(cfg_.controller, init, params_);
    visual_ = VisualParams::init(cfg_.feature_dim, init, params_);
    fusion_ = FusionParams::init(cfg_.feature_dim, cfg_.controller.output_dim, init, params_);
  }

  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;
  Model(Model&&) = default;
  Model& operator=(Model&&) = default;

  const ModelConfig& config() const noexcept { return cfg_; }
  ParamSet& params() noexcept { return params_; }
  const ParamSet& params() const noexcept { return params_; }
  const ControllerParams& controller() const noexcept { return controller_; }
  const VisualParams& visual() const noexcept { return visual_; }
  const FusionParams& fusion() const noexcept { return fusion_; }

  void set_attention(const AttentionFlags& flags) noexcept { cfg_.attention = flags; }

  Var encode(const TokenSequence& tokens) const {
    return encode_query(tokens, controller_, cfg_.controller, cfg_.attention.textual);
  }

  Var attend_frames(const FrameFeatureMatrix& frames) const {
    check_frames(frames);
    Var v = Var::constant(frames.features);
    return cfg_.attention.visual ? visual_attention(v, visual_) : v;
  }

  Var logits(const TokenSequence& tokens, const FrameFeatureMatrix& frames) const {
    Var z_ta = encode(tokens);
    Var z_va = attend_frames(frames);
    Var z_ia = interactive_attention(z_ta, z_va, fusion_, cfg_.attention.interactive);
    return classify_frames(z_ia, fusion_);
  }

  SummaryResult summarize(const TokenSequence& tokens, const FrameFeatureMatrix& frames,
                          int threshold = kDefaultSummaryThreshold) const {
    return select_summary(logits(tokens, frames).value(), threshold);
  }

  void save(const std::filesystem::path& path) const {
    write_checkpoint(path, make_checkpoint(params_, to_json(cfg_).dump()));
  }

  static Model load(const std::filesystem::path& path) {
    Checkpoint ckpt = read_checkpoint(path);
    nlohmann::json meta;
    try {
      meta = nlohmann::json::parse(ckpt.metadata);
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("checkpoint metadata is not JSON: " + std::string(e.what()));
    }
    Model m(model_config_from_json(meta));
    m.params_.restore(ckpt.tensors);
    return m;
  }

 private:
  void check_frames(const FrameFeatureMatrix& frames) const {
    if (frames.feature_dim() != cfg_.feature_dim) {
      throw ConfigError("model expects " + std::to_string(cfg_.feature_dim) +
                        "-dim frame features, got " + std::to_string(frames.feature_dim()));
    }
  }

  ModelConfig cfg_;
  ParamSet params_;
  ControllerParams controller_;
  VisualParams visual_;
  FusionParams fusion_;
};

}  // namespace mvs
