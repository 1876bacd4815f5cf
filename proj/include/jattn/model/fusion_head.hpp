/*
 * Copyright 2026 The jattn Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <json.hpp>

#include "jattn/nn/layers.hpp"

namespace jattn {

enum class Pooling { kMean, kMax };

inline const char* to_string(Pooling p) { return p == Pooling::kMean ? "mean" : "max"; }
inline Pooling pooling_from_string(const std::string& s) {
  if (s == "mean") return Pooling::kMean;
  if (s == "max") return Pooling::kMax;
  throw ConfigError("unknown pooling: " + s);
}

struct FusionHeadConfig {
  int dim = 32;        // must match the encoder's token dimension
  int heads = 4;
  int attn_layers = 1;
  Pooling pooling = Pooling::kMean;
  int frames = 30;     // T; the positional projection consumes (T*3) values

  void validate() const {
    if (dim < 1 || heads < 1 || dim % heads != 0)
      throw ConfigError("fusion head dim must be divisible by heads");
    if (attn_layers < 1) throw ConfigError("fusion head needs >= 1 attention layer");
    if (frames < 1) throw ConfigError("fusion head frames must be >= 1");
  }
};

inline nlohmann::json head_config_to_json(const FusionHeadConfig& c) {
  return {{"dim", c.dim},
          {"heads", c.heads},
          {"attn_layers", c.attn_layers},
          {"pooling", to_string(c.pooling)},
          {"frames", c.frames}};
}

inline FusionHeadConfig head_config_from_json(const nlohmann::json& j) {
  FusionHeadConfig c;
  try {
    c.dim = j.at("dim").get<int>();
    c.heads = j.at("heads").get<int>();
    c.attn_layers = j.at("attn_layers").get<int>();
    c.pooling = pooling_from_string(j.at("pooling").get<std::string>());
    c.frames = j.at("frames").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed fusion head config: ") + e.what());
  }
  return c;
}

// Projects each joint's flattened (T,3) positional slice to the token
// dimension: p_j = W flatten(pos_j) + b.
inline Var project_positional(Tape& t, Var pos_flat, const Linear& proj,
                              const FwdCtx& ctx = {}) {
  return proj.forward(t, pos_flat, ctx);
}

// Position-augmented tokens: elementwise z + p.
inline Var augment_tokens(Tape& t, Var tokens, Var pos_tokens) {
  return t.add(tokens, pos_tokens);
}

// One multi-head self-attention pass over the J joint tokens.
inline Var cross_joint_attention(Tape& t, Var tokens, const MultiHeadAttention& attn,
                                 const FwdCtx& ctx = {},
                                 AttentionTrace* trace = nullptr) {
  return attn.forward(t, tokens, ctx, trace);
}

// Pools the attended tokens into one segment representation and applies the
// linear classifier; returns the scalar logit.
inline Var pool_and_classify(Tape& t, Var attended, Pooling pooling,
                             const Linear& classifier, const FwdCtx& ctx = {}) {
  Var u = pooling == Pooling::kMean ? t.mean_rows(attended) : t.max_rows(attended);
  return classifier.forward(t, u, ctx);
}

inline double sigmoid(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

// Positional projection + token augmentation + cross-joint attention +
// pooling + linear classifier. Owns its parameters; the encoder lives
// elsewhere.
class FusionHead {
 public:
  FusionHead(const FusionHeadConfig& cfg, std::uint64_t init_seed) : cfg_(cfg) {
    cfg_.validate();
    Rng rng(mix_seed(init_seed, 0xf057ULL));
    const auto d = static_cast<std::size_t>(cfg_.dim);
    pos_proj_ = Linear::create(store_, "head.pos_proj",
                               static_cast<std::size_t>(cfg_.frames) * 3, d, rng);
    for (int i = 0; i < cfg_.attn_layers; ++i)
      attn_.push_back(MultiHeadAttention::create(
          store_, "head.attn" + std::to_string(i), d, cfg_.heads, rng));
    classifier_ = Linear::create(store_, "head.classifier", d, 1, rng);
  }

  const FusionHeadConfig& config() const { return cfg_; }
  ParamStore& params() { return store_; }
  const Linear& pos_proj() const { return pos_proj_; }
  const MultiHeadAttention& attention(int layer = 0) const { return attn_.at(layer); }
  const Linear& classifier() const { return classifier_; }

  void set_trainable(bool trainable) {
    for (Param* p : store_.all()) p->trainable = trainable;
  }

  // tokens: (J, d) motion tokens; pos_flat: (J, 3T) flattened positional
  // tensor. Returns the (1,1) logit node.
  Var forward(Tape& t, Var tokens, Var pos_flat, const FwdCtx& ctx = {},
              AttentionTrace* trace = nullptr) const {
    if (t.val(tokens).cols() != static_cast<std::size_t>(cfg_.dim))
      throw ShapeError("fusion head: token dim " +
                       std::to_string(t.val(tokens).cols()) + " vs configured " +
                       std::to_string(cfg_.dim));
    Var p = project_positional(t, pos_flat, pos_proj_, ctx);
    Var z = augment_tokens(t, tokens, p);
    for (const auto& layer : attn_) z = cross_joint_attention(t, z, layer, ctx, trace);
    return pool_and_classify(t, z, cfg_.pooling, classifier_, ctx);
  }

  // Convenience inference path on plain tensors.
  double logit(const Tensor& tokens, const Tensor& pos_flat) const {
    Tape t;
    Var out = forward(t, t.constant(tokens), t.constant(pos_flat));
    return t.val(out).data[0];
  }

  double score(const Tensor& tokens, const Tensor& pos_flat) const {
    return sigmoid(logit(tokens, pos_flat));
  }

 private:
  FusionHeadConfig cfg_;
  ParamStore store_;
  Linear pos_proj_;
  std::vector<MultiHeadAttention> attn_;
  Linear classifier_;
};

}  // namespace jattn
