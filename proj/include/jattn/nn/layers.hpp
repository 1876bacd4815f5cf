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

#include <memory>
#include <string>
#include <vector>

#include "jattn/nn/graph.hpp"

namespace jattn {

// Forward context threaded through every layer: training-mode flag and the
// RNG that feeds dropout masks. Inference runs with train_mode=false and no
// stochastic nodes at all.
struct FwdCtx {
  bool train_mode = false;
  Rng* rng = nullptr;
};

struct LoraAdapter;

// y = x W^T + b, with an optional low-rank update added on top.
struct Linear {
  Param* weight = nullptr;  // (d_out, d_in)
  Param* bias = nullptr;    // (1, d_out)
  std::string name;
  std::unique_ptr<LoraAdapter> lora;

  std::size_t d_in() const { return weight->value.cols(); }
  std::size_t d_out() const { return weight->value.rows(); }

  static Linear create(ParamStore& store, const std::string& name, std::size_t d_in,
                       std::size_t d_out, Rng& rng, double init_std = 0.02) {
    Linear l;
    l.name = name;
    l.weight = &store.create(name + ".weight", {d_out, d_in});
    l.bias = &store.create(name + ".bias", {1, d_out});
    init_normal(*l.weight, rng, init_std);
    return l;
  }

  Var forward(Tape& t, Var x, const FwdCtx& ctx = {}) const;
};

// Trainable low-rank update for one linear layer: (alpha/r) * B A x, with
// dropout on the adapter input path. B starts at zero so an injected,
// untrained adapter leaves the base output unchanged.
struct LoraAdapter {
  Param* A = nullptr;  // (r, d_in)
  Param* B = nullptr;  // (d_out, r)
  double scale = 1.0;  // alpha / r
  double dropout = 0.0;
  std::string layer_name;

  Var delta(Tape& t, Var x, const FwdCtx& ctx) const {
    Var in = x;
    if (ctx.train_mode && dropout > 0.0) {
      if (!ctx.rng) throw ConfigError("lora dropout in train mode needs an rng");
      in = t.dropout(in, dropout, *ctx.rng);
    }
    Var down = t.matmul_t(in, t.param(*A));   // (n, r)
    Var up = t.matmul_t(down, t.param(*B));   // (n, d_out)
    return t.scale(up, scale);
  }
};

inline Var Linear::forward(Tape& t, Var x, const FwdCtx& ctx) const {
  if (t.val(x).cols() != d_in())
    throw ShapeError(name + ": input " + t.val(x).shape_str() + " vs d_in " +
                     std::to_string(d_in()));
  Var y = t.add_row(t.matmul_t(x, t.param(*weight)), t.param(*bias));
  if (lora) y = t.add(y, lora->delta(t, x, ctx));
  return y;
}

struct LayerNorm {
  Param* gain = nullptr;
  Param* bias = nullptr;

  static LayerNorm create(ParamStore& store, const std::string& name, std::size_t d) {
    LayerNorm ln;
    ln.gain = &store.create(name + ".gain", {1, d});
    ln.bias = &store.create(name + ".bias", {1, d});
    init_constant(*ln.gain, 1.0);
    return ln;
  }

  Var forward(Tape& t, Var x) const {
    return t.layer_norm_rows(x, t.param(*gain), t.param(*bias));
  }
};

// Exposes the per-head attention weight matrices of a forward pass.
struct AttentionTrace {
  std::vector<Tensor> head_weights;  // each (n, n), rows sum to 1
};

struct MultiHeadAttention {
  Linear wq, wk, wv, wo;
  int heads = 1;

  static MultiHeadAttention create(ParamStore& store, const std::string& name,
                                   std::size_t d, int heads, Rng& rng,
                                   double init_std = 0.02) {
    if (heads < 1 || d % static_cast<std::size_t>(heads) != 0)
      throw ConfigError(name + ": embedding dim " + std::to_string(d) +
                        " not divisible by heads " + std::to_string(heads));
    MultiHeadAttention a;
    a.heads = heads;
    a.wq = Linear::create(store, name + ".q", d, d, rng, init_std);
    a.wk = Linear::create(store, name + ".k", d, d, rng, init_std);
    a.wv = Linear::create(store, name + ".v", d, d, rng, init_std);
    a.wo = Linear::create(store, name + ".out", d, d, rng, init_std);
    return a;
  }

  // x: (n, d) -> (n, d). Scores are scaled by 1/sqrt(d/heads), the per-head
  // key dimension.
  Var forward(Tape& t, Var x, const FwdCtx& ctx = {},
              AttentionTrace* trace = nullptr) const {
    const std::size_t d = wq.d_out();
    const std::size_t dh = d / static_cast<std::size_t>(heads);
    Var q = wq.forward(t, x, ctx);
    Var k = wk.forward(t, x, ctx);
    Var v = wv.forward(t, x, ctx);
    std::vector<Var> outs;
    outs.reserve(static_cast<std::size_t>(heads));
    for (int h = 0; h < heads; ++h) {
      const std::size_t c0 = static_cast<std::size_t>(h) * dh;
      Var qh = t.slice_cols(q, c0, c0 + dh);
      Var kh = t.slice_cols(k, c0, c0 + dh);
      Var vh = t.slice_cols(v, c0, c0 + dh);
      Var scores = t.scale(t.matmul_t(qh, kh), 1.0 / std::sqrt(static_cast<double>(dh)));
      Var attn = t.softmax_rows(scores);
      if (trace) trace->head_weights.push_back(t.val(attn));
      outs.push_back(t.matmul(attn, vh));
    }
    Var merged = heads == 1 ? outs[0] : t.concat_cols(outs);
    return wo.forward(t, merged, ctx);
  }
};

struct Mlp {
  Linear fc1, fc2;

  static Mlp create(ParamStore& store, const std::string& name, std::size_t d,
                    std::size_t hidden, Rng& rng, double init_std = 0.02) {
    Mlp m;
    m.fc1 = Linear::create(store, name + ".fc1", d, hidden, rng, init_std);
    m.fc2 = Linear::create(store, name + ".fc2", hidden, d, rng, init_std);
    return m;
  }

  Var forward(Tape& t, Var x, const FwdCtx& ctx = {}) const {
    return fc2.forward(t, t.gelu(fc1.forward(t, x, ctx)), ctx);
  }
};

// Pre-norm transformer block: x + MHA(LN(x)), then x + MLP(LN(x)).
struct TransformerBlock {
  LayerNorm ln1, ln2;
  MultiHeadAttention attn;
  Mlp mlp;

  static TransformerBlock create(ParamStore& store, const std::string& name,
                                 std::size_t d, int heads, std::size_t mlp_hidden,
                                 Rng& rng) {
    TransformerBlock b;
    b.ln1 = LayerNorm::create(store, name + ".ln1", d);
    b.ln2 = LayerNorm::create(store, name + ".ln2", d);
    b.attn = MultiHeadAttention::create(store, name + ".attn", d, heads, rng);
    b.mlp = Mlp::create(store, name + ".mlp", d, mlp_hidden, rng);
    return b;
  }

  Var forward(Tape& t, Var x, const FwdCtx& ctx = {}) const {
    x = t.add(x, attn.forward(t, ln1.forward(t, x), ctx));
    return t.add(x, mlp.forward(t, ln2.forward(t, x), ctx));
  }

  // The four LoRA-injectable layer kinds of this block.
  std::vector<Linear*> adaptable_linears() {
    return {&attn.wq, &attn.wk, &attn.wv, &mlp.fc1, &mlp.fc2};
  }
};

}  // namespace jattn
