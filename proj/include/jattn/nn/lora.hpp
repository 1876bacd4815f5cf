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

#include <string>
#include <vector>

#include "jattn/nn/layers.hpp"

namespace jattn {

struct LoraConfig {
  int rank = 8;
  double alpha = 16.0;
  double dropout = 0.05;
  int target_blocks = 2;  // blocks counted from the output end

  void validate() const {
    if (rank < 1) throw ConfigError("lora rank must be >= 1");
    if (dropout < 0.0 || dropout >= 1.0)
      throw ConfigError("lora dropout must be in [0,1)");
    if (alpha <= 0.0) throw ConfigError("lora alpha must be positive");
    if (target_blocks < 1) throw ConfigError("lora target_blocks must be >= 1");
  }
};

// Attaches a fresh adapter to one linear layer. A is zero-mean Gaussian
// (std 0.02), B is zero, so the adapted layer initially equals the base one.
inline void attach_lora(Linear& layer, const LoraConfig& cfg, ParamStore& store,
                        Rng& rng) {
  cfg.validate();
  if (layer.lora) throw ConfigError(layer.name + ": lora adapter already attached");
  auto ad = std::make_unique<LoraAdapter>();
  ad->layer_name = layer.name;
  ad->A = &store.create(layer.name + ".lora.A",
                        {static_cast<std::size_t>(cfg.rank), layer.d_in()});
  ad->B = &store.create(layer.name + ".lora.B",
                        {layer.d_out(), static_cast<std::size_t>(cfg.rank)});
  init_normal(*ad->A, rng, 0.02);
  ad->scale = cfg.alpha / cfg.rank;
  ad->dropout = cfg.dropout;
  layer.lora = std::move(ad);
}

// Injects adapters into the q/k/v and feed-forward linears of the last
// cfg.target_blocks blocks and freezes every base parameter. Returns the
// number of adapters attached.
inline int inject_lora_into_blocks(std::vector<TransformerBlock*> blocks,
                                   const LoraConfig& cfg, ParamStore& store,
                                   Rng& rng) {
  cfg.validate();
  if (static_cast<int>(blocks.size()) < cfg.target_blocks)
    throw ConfigError("lora: need at least " + std::to_string(cfg.target_blocks) +
                      " transformer blocks, have " + std::to_string(blocks.size()));
  int count = 0;
  const std::size_t first = blocks.size() - static_cast<std::size_t>(cfg.target_blocks);
  for (std::size_t i = first; i < blocks.size(); ++i) {
    for (Linear* layer : blocks[i]->adaptable_linears()) {
      attach_lora(*layer, cfg, store, rng);
      ++count;
    }
  }
  return count;
}

// Collapses the adapter into the base weight, W += (alpha/r) B A, and
// detaches it. Dropout is an expectation-preserving scaling, so merged
// inference matches adapted inference.
inline void merge_lora(Linear& layer) {
  if (!layer.lora) return;
  const Tensor& A = layer.lora->A->value;  // (r, d_in)
  const Tensor& B = layer.lora->B->value;  // (d_out, r)
  Tensor update;
  matmul_nn(B, A, update);  // (d_out, d_in)
  Tensor& W = layer.weight->value;
  for (std::size_t i = 0; i < W.data.size(); ++i)
    W.data[i] += layer.lora->scale * update.data[i];
  layer.lora.reset();
}

inline bool is_lora_param_name(const std::string& name) {
  return name.size() > 7 && (name.find(".lora.A") != std::string::npos ||
                             name.find(".lora.B") != std::string::npos);
}

}  // namespace jattn
