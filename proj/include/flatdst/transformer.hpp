// Copyright 2026 The flatdst Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// One multi-layer Transformer that serves as both encoder and decoder.
//
// Encoder mode runs every layer as bidirectional self-attention. Decoder
// mode runs the SAME layers left to right, and layer l additionally prepends
// reused encoder states (taken from the encoder's level l-1) to the keys and
// values, so decoder queries attend to [reused ; decoder-so-far].

#ifndef FLATDST_TRANSFORMER_HPP_
#define FLATDST_TRANSFORMER_HPP_

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "flatdst/autograd.hpp"
#include "flatdst/error.hpp"
#include "flatdst/mask.hpp"
#include "flatdst/ops.hpp"
#include "flatdst/tensor.hpp"

namespace flatdst {

struct ModelConfig {
  int num_layers = 2;
  int num_heads = 2;
  int hidden_dim = 32;
  int ffn_dim = 128;
  int vocab_size = 0;
  int max_positions = 256;
  int num_types = 2;
  double layer_norm_eps = 1e-12;
  double init_std = 0.02;

  int head_dim() const { return hidden_dim / num_heads; }

  void validate() const {
    auto fail = [](const std::string& what) { throw ContractError("model config: " + what); };
    if (num_layers < 1) fail("num_layers must be >= 1");
    if (num_heads < 1) fail("num_heads must be >= 1");
    if (hidden_dim < 1 || hidden_dim % num_heads != 0) {
      fail("hidden_dim " + std::to_string(hidden_dim) + " not divisible by num_heads " +
           std::to_string(num_heads));
    }
    if (ffn_dim < 1) fail("ffn_dim must be >= 1");
    if (vocab_size < 1) fail("vocab_size must be >= 1");
    if (max_positions < 1) fail("max_positions must be >= 1");
    if (num_types != 2) fail("num_types must be 2");
  }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

template <Real T>
struct AttentionWeights {
  Var<T> wq, bq, wk, bk, wv, bv, wo, bo;  // bk stays undefined unless set by hand
};

template <Real T>
struct LayerWeights {
  AttentionWeights<T> attn;
  Var<T> attn_norm_gain, attn_norm_bias;
  Var<T> ffn_w1, ffn_b1, ffn_w2, ffn_b2;
  Var<T> ffn_norm_gain, ffn_norm_bias;
};

// Hidden matrices X^0 .. X^L of one pass.
template <Real T>
using LayerStates = std::vector<Var<T>>;

// Multi-head attention of query_src over kv_src. Each head j uses column
// block j of the projections, softmax(Q_j K_j^T / sqrt(d_k) + mask) V_j.
template <Real T>
Var<T> attention(const Var<T>& query_src, const Var<T>& kv_src,
                 const AttentionMask& mask, const AttentionWeights<T>& w,
                 int num_heads) {
  if (mask.rows() != query_src.rows() || mask.cols() != kv_src.rows()) {
    throw DimensionError("attention: mask " + shape_string({mask.rows(), mask.cols()}) +
                         " for " + std::to_string(query_src.rows()) + " queries and " +
                         std::to_string(kv_src.rows()) + " keys");
  }
  const std::size_t d = query_src.cols();
  const std::size_t dk = d / static_cast<std::size_t>(num_heads);
  const T inv_sqrt_dk = T{1} / std::sqrt(static_cast<T>(dk));
  Var<T> q = linear(query_src, w.wq, w.bq);
  Var<T> k = linear(kv_src, w.wk, w.bk);
  Var<T> v = linear(kv_src, w.wv, w.bv);
  std::vector<Var<T>> heads;
  heads.reserve(static_cast<std::size_t>(num_heads));
  for (int h = 0; h < num_heads; ++h) {
    const std::size_t off = static_cast<std::size_t>(h) * dk;
    Var<T> qh = num_heads == 1 ? q : slice_cols(q, off, dk);
    Var<T> kh = num_heads == 1 ? k : slice_cols(k, off, dk);
    Var<T> vh = num_heads == 1 ? v : slice_cols(v, off, dk);
    Var<T> scores = scale(matmul_nt(qh, kh), inv_sqrt_dk);
    heads.push_back(matmul(masked_softmax(scores, mask), vh));
  }
  Var<T> context = num_heads == 1 ? heads.front() : concat_cols(heads);
  return linear(context, w.wo, w.bo);
}

template <Real T>
class Transformer {
 public:
  Transformer(const ModelConfig& config, ParameterSet<T>& params, std::uint64_t seed)
      : config_(config) {
    config_.validate();
    std::mt19937_64 rng(seed);
    const auto d = static_cast<std::size_t>(config_.hidden_dim);
    const auto f = static_cast<std::size_t>(config_.ffn_dim);
    auto normal = [&](std::size_t r, std::size_t c) {
      std::normal_distribution<double> dist(0.0, config_.init_std);
      Tensor<T> t = Tensor<T>::matrix(r, c);
      for (auto& x : t.data()) x = static_cast<T>(dist(rng));
      return t;
    };
    auto zeros = [](std::size_t n) { return Tensor<T>(Shape{n}); };
    auto ones = [](std::size_t n) { return Tensor<T>(Shape{n}, T{1}); };

    token_ = params.add("embeddings.token", normal(static_cast<std::size_t>(config_.vocab_size), d));
    position_ = params.add("embeddings.position",
                           normal(static_cast<std::size_t>(config_.max_positions), d));
    type_ = params.add("embeddings.type", normal(static_cast<std::size_t>(config_.num_types), d));
    emb_norm_gain_ = params.add("embeddings.norm.gain", ones(d));
    emb_norm_bias_ = params.add("embeddings.norm.bias", zeros(d));
    for (int l = 1; l <= config_.num_layers; ++l) {
      const std::string p = "layer." + std::to_string(l) + ".";
      LayerWeights<T> lw;
      lw.attn.wq = params.add(p + "attn.wq", normal(d, d));
      lw.attn.bq = params.add(p + "attn.bq", zeros(d));
      lw.attn.wk = params.add(p + "attn.wk", normal(d, d));
      lw.attn.wv = params.add(p + "attn.wv", normal(d, d));
      lw.attn.bv = params.add(p + "attn.bv", zeros(d));
      lw.attn.wo = params.add(p + "attn.wo", normal(d, d));
      lw.attn.bo = params.add(p + "attn.bo", zeros(d));
      lw.attn_norm_gain = params.add(p + "attn_norm.gain", ones(d));
      lw.attn_norm_bias = params.add(p + "attn_norm.bias", zeros(d));
      lw.ffn_w1 = params.add(p + "ffn.w1", normal(d, f));
      lw.ffn_b1 = params.add(p + "ffn.b1", zeros(f));
      lw.ffn_w2 = params.add(p + "ffn.w2", normal(f, d));
      lw.ffn_b2 = params.add(p + "ffn.b2", zeros(d));
      lw.ffn_norm_gain = params.add(p + "ffn_norm.gain", ones(d));
      lw.ffn_norm_bias = params.add(p + "ffn_norm.bias", zeros(d));
      layers_.push_back(std::move(lw));
    }
  }

  const ModelConfig& config() const { return config_; }
  int num_layers() const { return config_.num_layers; }
  const Var<T>& token_embedding() const { return token_; }
  const LayerWeights<T>& layer(int l) const {
    check_layer(l);
    return layers_[static_cast<std::size_t>(l - 1)];
  }

  // LayerNorm(tok[token_ids] + pos[position_ids] + type[type_ids]).
  Var<T> embed_input(std::span<const int> token_ids, std::span<const int> position_ids,
                     std::span<const int> type_ids) const {
    if (token_ids.size() != position_ids.size() || token_ids.size() != type_ids.size()) {
      throw DimensionError("embed_input: sequence lengths " +
                           std::to_string(token_ids.size()) + "/" +
                           std::to_string(position_ids.size()) + "/" +
                           std::to_string(type_ids.size()) + " differ");
    }
    if (token_ids.empty()) throw ContractError("embed_input of an empty sequence");
    Var<T> sum = add(add(embedding(token_, token_ids, "token"),
                         embedding(position_, position_ids, "position")),
                     embedding(type_, type_ids, "type"));
    return layer_norm(sum, emb_norm_gain_, emb_norm_bias_,
                      static_cast<T>(config_.layer_norm_eps));
  }

  // Layer l in [1, L]: attention sublayer then GELU feed-forward, each with a
  // residual connection followed by layer norm. kv_override, when given, is
  // prepended to the key/value source.
  Var<T> transformer_block(int l, const Var<T>& hidden, const Var<T>* kv_override,
                           const AttentionMask& mask) const {
    const LayerWeights<T>& w = layer(l);
    const T eps = static_cast<T>(config_.layer_norm_eps);
    Var<T> kv = kv_override ? concat_rows<T>({*kv_override, hidden}) : hidden;
    Var<T> attn = attention(hidden, kv, mask, w.attn, config_.num_heads);
    Var<T> h1 = layer_norm(add(hidden, attn), w.attn_norm_gain, w.attn_norm_bias, eps);
    Var<T> ffn = linear(gelu(linear(h1, w.ffn_w1, w.ffn_b1)), w.ffn_w2, w.ffn_b2);
    return layer_norm(add(h1, ffn), w.ffn_norm_gain, w.ffn_norm_bias, eps);
  }

  // Bidirectional pass; returns X^0 .. X^L.
  LayerStates<T> encode_stack(const Var<T>& x0) const {
    const AttentionMask mask = build_encoder_mask(x0.rows());
    LayerStates<T> states{x0};
    states.reserve(static_cast<std::size_t>(config_.num_layers) + 1);
    for (int l = 1; l <= config_.num_layers; ++l) {
      states.push_back(transformer_block(l, states.back(), nullptr, mask));
    }
    return states;
  }

  // Left-to-right pass with reused[l-1] prepended at layer l; returns
  // Y^0 .. Y^L.
  LayerStates<T> decode_stack(const Var<T>& y0, const std::vector<Var<T>>& reused) const {
    if (reused.size() != static_cast<std::size_t>(config_.num_layers)) {
      throw DimensionError("decode_stack: " + std::to_string(reused.size()) +
                           " reused levels for " + std::to_string(config_.num_layers) +
                           " layers");
    }
    const std::size_t reuse_len = reused.front().rows();
    for (const auto& r : reused) {
      if (r.rows() != reuse_len) {
        throw DimensionError("decode_stack: reused levels have unequal lengths");
      }
    }
    const AttentionMask mask = build_decoder_mask(reuse_len, y0.rows());
    LayerStates<T> states{y0};
    states.reserve(static_cast<std::size_t>(config_.num_layers) + 1);
    for (int l = 1; l <= config_.num_layers; ++l) {
      const Var<T>& over = reused[static_cast<std::size_t>(l - 1)];
      states.push_back(transformer_block(l, states.back(), reuse_len ? &over : nullptr,
                                         mask));
    }
    return states;
  }

 private:
  void check_layer(int l) const {
    if (l < 1 || l > config_.num_layers) {
      throw ContractError("layer index " + std::to_string(l) + " outside [1, " +
                          std::to_string(config_.num_layers) + "]");
    }
  }

  ModelConfig config_;
  Var<T> token_, position_, type_, emb_norm_gain_, emb_norm_bias_;
  std::vector<LayerWeights<T>> layers_;
};

}  // namespace flatdst

#endif  // FLATDST_TRANSFORMER_HPP_
