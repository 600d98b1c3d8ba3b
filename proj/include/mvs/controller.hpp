#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "mvs/autodiff.hpp"
#include "mvs/params.hpp"
#include "mvs/tokenizer.hpp"

namespace mvs {

// Query-side transformer decoder. hidden_dim is the width of Q/K/V (and the
// attention scale d_k); output_dim is the size of the query representation
// handed to the fusion stage.
struct ControllerConfig {
  std::size_t vocab_size = 50257;
  std::size_t embed_dim = 32;
  std::size_t hidden_dim = 32;
  std::size_t ffn_dim = 64;
  std::size_t num_blocks = 2;
  std::size_t output_dim = 16;
  std::size_t max_tokens = 16;

  void validate() const {
    if (vocab_size == 0 || embed_dim < 2 || hidden_dim == 0 || ffn_dim == 0 ||
        num_blocks == 0 || output_dim == 0 || max_tokens == 0) {
      throw ConfigError("controller dimensions must be positive (embed_dim >= 2)");
    }
  }
};

struct DecoderBlockParams {
  Var w_q, b_q;
  Var w_k, b_k;
  Var w_v, b_v;
  Var w_o, b_o;  // H_s -> E_s so the residual and the next block line up
  Var ln_gain, ln_bias;
  Var w_1, b_1;
  Var w_2, b_2;
};

struct ControllerParams {
  Var token_embedding;  // [E_s x V_s], column k is the embedding of token k
  std::vector<DecoderBlockParams> blocks;
  Var w_proj, b_proj;  // [output_dim x E_s]
  Var w_ta, b_ta;      // textual gate

  static ControllerParams init(const ControllerConfig& cfg, Initializer& init, ParamSet& set,
                               const std::string& prefix = "controller.") {
    cfg.validate();
    const std::size_t E = cfg.embed_dim, H = cfg.hidden_dim, F = cfg.ffn_dim, O = cfg.output_dim;
    ControllerParams p;
    p.token_embedding = init.gaussian(set, prefix + "token_embedding", {E, cfg.vocab_size});
    for (std::size_t b = 0; b < cfg.num_blocks; ++b) {
      const std::string bp = prefix + "block" + std::to_string(b) + ".";
      DecoderBlockParams blk;
      blk.w_q = init.gaussian(set, bp + "w_q", {H, E});
      blk.b_q = init.zeros(set, bp + "b_q", {H});
      blk.w_k = init.gaussian(set, bp + "w_k", {H, E});
      blk.b_k = init.zeros(set, bp + "b_k", {H});
      blk.w_v = init.gaussian(set, bp + "w_v", {H, E});
      blk.b_v = init.zeros(set, bp + "b_v", {H});
      blk.w_o = init.gaussian(set, bp + "w_o", {E, H});
      blk.b_o = init.zeros(set, bp + "b_o", {E});
      blk.ln_gain = init.constant(set, bp + "ln_gain", {E}, 1.0);
      blk.ln_bias = init.zeros(set, bp + "ln_bias", {E});
      blk.w_1 = init.gaussian(set, bp + "w_1", {F, E});
      blk.b_1 = init.zeros(set, bp + "b_1", {F});
      blk.w_2 = init.gaussian(set, bp + "w_2", {E, F});
      blk.b_2 = init.zeros(set, bp + "b_2", {E});
      p.blocks.push_back(std::move(blk));
    }
    p.w_proj = init.gaussian(set, prefix + "w_proj", {O, E});
    p.b_proj = init.zeros(set, prefix + "b_proj", {O});
    p.w_ta = init.gaussian(set, prefix + "w_ta", {O, O});
    p.b_ta = init.zeros(set, prefix + "b_ta", {O});
    return p;
  }
};

// Sinusoidal encoding: even columns sin(pos / 10000^(2i/d)), odd columns cos.
inline Tensor positional_encoding(std::size_t positions, std::size_t dim) {
  Tensor pe({positions, dim});
  for (std::size_t pos = 0; pos < positions; ++pos) {
    for (std::size_t c = 0; c < dim; ++c) {
      const double pair = static_cast<double>(c - c % 2);
      const double angle = static_cast<double>(pos) / std::pow(10000.0, pair / static_cast<double>(dim));
      pe.at(pos, c) = (c % 2 == 0) ? std::sin(angle) : std::cos(angle);
    }
  }
  return pe;
}

// Row n = column ids[n] of the embedding table + positional encoding at n.
inline Var embed(const TokenSequence& tokens, const Var& token_embedding) {
  const std::size_t E = token_embedding.value().rows();
  const std::size_t V = token_embedding.value().cols();
  validate_tokens(tokens, V, tokens.ids.size());
  Var rows = gather_columns(token_embedding, tokens.ids);
  return add(rows, Var::constant(positional_encoding(tokens.ids.size(), E)));
}

// Single-head softmax(mask(Q K^T / sqrt(d_k))) V.
//
// The key bias adds q_n . b_k to every score of row n, which the row softmax
// cancels exactly; it is kept as a parameter but not applied.
inline Var masked_self_attention(const Var& x, const DecoderBlockParams& blk) {
  Var q = linear(x, blk.w_q, blk.b_q);
  Var k = linear(x, blk.w_k);
  Var v = linear(x, blk.w_v, blk.b_v);
  const double d_k = static_cast<double>(q.value().cols());
  Var scores = scale(matmul_transposed(q, k), 1.0 / std::sqrt(d_k));
  return matmul(softmax_rows(causal_mask(scores)), v);
}

// attention -> residual -> layer norm -> GELU feed-forward -> residual.
inline Var decoder_block(const Var& x, const DecoderBlockParams& blk) {
  Var attended = linear(masked_self_attention(x, blk), blk.w_o, blk.b_o);
  Var normed = layer_norm(add(x, attended), blk.ln_gain, blk.ln_bias);
  Var ffn = linear(gelu(linear(normed, blk.w_1, blk.b_1)), blk.w_2, blk.b_2);
  return add(normed, ffn);
}

// sigmoid(W f + b) (.) f
inline Var textual_attention(const Var& f, const Var& w_ta, const Var& b_ta) {
  return hadamard(f, sigmoid(linear(f, w_ta, b_ta)));
}

// Full per-position output of the decoder stack, [N x E_s].
inline Var contextualize(const TokenSequence& tokens, const ControllerParams& params,
                         const ControllerConfig& cfg) {
  validate_tokens(tokens, cfg.vocab_size, cfg.max_tokens);
  Var h = embed(tokens, params.token_embedding);
  for (const auto& blk : params.blocks) h = decoder_block(h, blk);
  return h;
}

// Final-token row, projected to output_dim, optionally gated.
inline Var encode_query(const TokenSequence& tokens, const ControllerParams& params,
                        const ControllerConfig& cfg, bool textual_attention_on = true) {
  Var h = contextualize(tokens, params, cfg);
  Var pooled = select_row(h, tokens.ids.size() - 1);
  Var f = linear(pooled, params.w_proj, params.b_proj);
  if (!textual_attention_on) return f;
  return textual_attention(f, params.w_ta, params.b_ta);
}

}  // namespace mvs
