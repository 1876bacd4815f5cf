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

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "jattn/core/binio.hpp"
#include "jattn/crop/cropper.hpp"
#include "jattn/nn/layers.hpp"
#include "jattn/nn/lora.hpp"

namespace jattn {

// A motion token: one d-dimensional vector summarizing a joint clip.
using MotionToken = std::vector<double>;

// How the backbone's output sequence collapses to a single token.
enum class TokenReduction { kMean, kClsSlot };

inline const char* to_string(TokenReduction r) {
  return r == TokenReduction::kMean ? "mean" : "cls";
}
inline TokenReduction token_reduction_from_string(const std::string& s) {
  if (s == "mean") return TokenReduction::kMean;
  if (s == "cls") return TokenReduction::kClsSlot;
  throw ConfigError("unknown token reduction: " + s);
}

// Geometry and normalization the backbone expects. Clips are spatially
// resized (bilinear) to (input_h, input_w); the temporal extent must match.
struct PreprocessSpec {
  int input_t = 30;
  int input_h = 120;
  int input_w = 120;
  std::array<double, 3> mean{0.5, 0.5, 0.5};
  std::array<double, 3> stddev{0.5, 0.5, 0.5};
};

// Shared video encoder behind which backbones are interchangeable. One
// instance (one weight set) serves all joints; joint identity reaches the
// model only through the positional embedding downstream.
class EncoderAdapter {
 public:
  virtual ~EncoderAdapter() = default;

  virtual const std::string& name() const = 0;
  virtual int dim() const = 0;
  virtual const PreprocessSpec& preprocess() const = 0;
  virtual ParamStore& params() = 0;

  // Ordered transformer blocks, input side first; "last two" are the
  // adaptation targets.
  virtual std::vector<TransformerBlock*> blocks() = 0;

  // Whether base weights take gradient updates. LoRA adapters stay
  // trainable regardless.
  virtual void set_trainable(bool trainable) = 0;
  virtual bool trainable() const = 0;

  // On-tape forward: clip -> (1 x d) token node.
  virtual Var encode(Tape& tape, const Clip& clip, const FwdCtx& ctx) = 0;

  // Hash over base parameter values; used by the frozen-weights guard.
  std::uint64_t base_value_hash() {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (Param* p : params().all()) {
      if (is_lora_param_name(p->name)) continue;
      h = fnv1a_str(p->name, h);
      h = fnv1a(p->value.data.data(), p->value.data.size() * sizeof(double), h);
    }
    return h;
  }
};

// Normalized patch rows for a 3-D patch embedding: one row per
// (t, y, x) patch, t-major, entries ordered (dt, dy, dx, channel).
inline Tensor clip_to_patches(const Clip& clip, const PreprocessSpec& spec, int pt,
                              int ph, int pw) {
  if (clip.frames != spec.input_t)
    throw ShapeError("clip has " + std::to_string(clip.frames) +
                     " frames, backbone expects " + std::to_string(spec.input_t));
  const bool resize = clip.height != spec.input_h || clip.width != spec.input_w;
  const int T = spec.input_t, H = spec.input_h, W = spec.input_w;
  if (T % pt || H % ph || W % pw)
    throw ConfigError("patch size does not tile the input volume");

  // Normalized input volume, (t, y, x, c) layout.
  std::vector<double> vol(static_cast<std::size_t>(T) * H * W * 3);
  for (int t = 0; t < T; ++t) {
    for (int y = 0; y < H; ++y) {
      for (int x = 0; x < W; ++x) {
        for (int c = 0; c < 3; ++c) {
          double v;
          if (resize) {
            // bilinear sample in source clip coordinates
            const double sy = (y + 0.5) * clip.height / H - 0.5;
            const double sx = (x + 0.5) * clip.width / W - 0.5;
            const double fy = std::clamp(sy, 0.0, static_cast<double>(clip.height - 1));
            const double fx = std::clamp(sx, 0.0, static_cast<double>(clip.width - 1));
            const int y0 = static_cast<int>(fy), x0 = static_cast<int>(fx);
            const int y1 = std::min(y0 + 1, clip.height - 1);
            const int x1 = std::min(x0 + 1, clip.width - 1);
            const double ay = fy - y0, ax = fx - x0;
            const double top = (1 - ax) * clip.at(t, y0, x0, c) + ax * clip.at(t, y0, x1, c);
            const double bot = (1 - ax) * clip.at(t, y1, x0, c) + ax * clip.at(t, y1, x1, c);
            v = (1 - ay) * top + ay * bot;
          } else {
            v = clip.at(t, y, x, c);
          }
          vol[((static_cast<std::size_t>(t) * H + y) * W + x) * 3 + c] =
              (v / 255.0 - spec.mean[c]) / spec.stddev[c];
        }
      }
    }
  }

  const int nt = T / pt, ny = H / ph, nx = W / pw;
  const std::size_t patch_dim = static_cast<std::size_t>(pt) * ph * pw * 3;
  Tensor patches({static_cast<std::size_t>(nt) * ny * nx, patch_dim});
  std::size_t row = 0;
  for (int bt = 0; bt < nt; ++bt)
    for (int by = 0; by < ny; ++by)
      for (int bx = 0; bx < nx; ++bx, ++row) {
        double* dst = &patches.data[row * patch_dim];
        for (int dt = 0; dt < pt; ++dt)
          for (int dy = 0; dy < ph; ++dy)
            for (int dx = 0; dx < pw; ++dx)
              for (int c = 0; c < 3; ++c)
                *dst++ = vol[((static_cast<std::size_t>(bt * pt + dt) * H +
                               (by * ph + dy)) * W + (bx * pw + dx)) * 3 + c];
      }
  return patches;
}

// Collapses an encoder output sequence (n x d) to one token. The cls
// reduction takes slot 0; mean averages all positions.
inline MotionToken token_from_encoder_output(const Tensor& outputs,
                                             TokenReduction reduction) {
  if (outputs.rows() == 0 || outputs.numel() == 0)
    throw DataError("token_from_encoder_output: empty encoder output");
  const std::size_t d = outputs.cols();
  MotionToken token(d, 0.0);
  if (reduction == TokenReduction::kClsSlot) {
    for (std::size_t j = 0; j < d; ++j) token[j] = outputs.at(0, j);
    return token;
  }
  for (std::size_t r = 0; r < outputs.rows(); ++r)
    for (std::size_t j = 0; j < d; ++j) token[j] += outputs.at(r, j);
  for (double& v : token) v /= static_cast<double>(outputs.rows());
  return token;
}

// Small video transformer trainable on a CPU: 3-D patch embedding, learned
// position embeddings, two pre-norm transformer blocks, final layer norm.
// Stands in for large pretrained backbones at desk scale; weights are
// deterministic in init_seed and fixed across training runs.
struct ReferenceEncoderConfig {
  int dim = 32;
  int heads = 4;
  int mlp_hidden = 64;
  int num_blocks = 2;
  int input_t = 30;
  int input_h = 120;
  int input_w = 120;
  int patch_t = 6;
  int patch_h = 24;
  int patch_w = 24;
  TokenReduction reduction = TokenReduction::kMean;
  std::uint64_t init_seed = 0x7a5eedULL;

  void validate() const {
    if (dim < 1 || heads < 1 || dim % heads != 0)
      throw ConfigError("encoder dim must be divisible by heads");
    if (num_blocks < 2) throw ConfigError("encoder needs at least 2 blocks");
    if (input_t % patch_t || input_h % patch_h || input_w % patch_w)
      throw ConfigError("patch size does not tile the encoder input");
  }

  int num_patches() const {
    return (input_t / patch_t) * (input_h / patch_h) * (input_w / patch_w);
  }
};

class ReferenceEncoder : public EncoderAdapter {
 public:
  explicit ReferenceEncoder(const ReferenceEncoderConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    spec_.input_t = cfg_.input_t;
    spec_.input_h = cfg_.input_h;
    spec_.input_w = cfg_.input_w;
    Rng rng(mix_seed(cfg_.init_seed, 0xe2c0de2ULL));
    const auto d = static_cast<std::size_t>(cfg_.dim);
    const std::size_t patch_dim =
        static_cast<std::size_t>(cfg_.patch_t) * cfg_.patch_h * cfg_.patch_w * 3;
    patch_embed_ = Linear::create(store_, "encoder.patch_embed", patch_dim, d, rng);
    const bool cls = cfg_.reduction == TokenReduction::kClsSlot;
    const std::size_t seq = static_cast<std::size_t>(cfg_.num_patches()) + (cls ? 1 : 0);
    if (cls) {
      cls_token_ = &store_.create("encoder.cls_token", {1, d});
      init_normal(*cls_token_, rng, 0.02);
    }
    pos_embed_ = &store_.create("encoder.pos_embed", {seq, d});
    init_normal(*pos_embed_, rng, 0.02);
    for (int i = 0; i < cfg_.num_blocks; ++i)
      blocks_.push_back(TransformerBlock::create(
          store_, "encoder.block" + std::to_string(i), d, cfg_.heads,
          static_cast<std::size_t>(cfg_.mlp_hidden), rng));
    final_ln_ = LayerNorm::create(store_, "encoder.final_ln", d);
    set_trainable(false);  // encoders ship frozen; the trainer opts in
  }

  const std::string& name() const override { return name_; }
  int dim() const override { return cfg_.dim; }
  const PreprocessSpec& preprocess() const override { return spec_; }
  ParamStore& params() override { return store_; }
  const ReferenceEncoderConfig& config() const { return cfg_; }

  std::vector<TransformerBlock*> blocks() override {
    std::vector<TransformerBlock*> out;
    for (auto& b : blocks_) out.push_back(&b);
    return out;
  }

  void set_trainable(bool trainable) override {
    trainable_ = trainable;
    for (Param* p : store_.all())
      if (!is_lora_param_name(p->name)) p->trainable = trainable;
  }
  bool trainable() const override { return trainable_; }

  Var encode(Tape& t, const Clip& clip, const FwdCtx& ctx) override {
    Var patches = t.constant(
        clip_to_patches(clip, spec_, cfg_.patch_t, cfg_.patch_h, cfg_.patch_w));
    Var x = patch_embed_.forward(t, patches, ctx);
    if (cls_token_) x = t.concat_rows({t.param(*cls_token_), x});
    x = t.add(x, t.param(*pos_embed_));
    for (const auto& b : blocks_) x = b.forward(t, x, ctx);
    x = final_ln_.forward(t, x);
    if (cfg_.reduction == TokenReduction::kClsSlot) return t.slice_rows(x, 0, 1);
    return t.mean_rows(x);
  }

 private:
  ReferenceEncoderConfig cfg_;
  PreprocessSpec spec_;
  std::string name_ = "reference";
  ParamStore store_;
  Linear patch_embed_;
  Param* cls_token_ = nullptr;
  Param* pos_embed_ = nullptr;
  std::vector<TransformerBlock> blocks_;
  LayerNorm final_ln_;
  bool trainable_ = false;
};

inline nlohmann::json encoder_config_to_json(const ReferenceEncoderConfig& c) {
  return {{"dim", c.dim},           {"heads", c.heads},
          {"mlp_hidden", c.mlp_hidden}, {"num_blocks", c.num_blocks},
          {"input_t", c.input_t},   {"input_h", c.input_h},
          {"input_w", c.input_w},   {"patch_t", c.patch_t},
          {"patch_h", c.patch_h},   {"patch_w", c.patch_w},
          {"reduction", to_string(c.reduction)}, {"init_seed", c.init_seed}};
}

inline ReferenceEncoderConfig encoder_config_from_json(const nlohmann::json& j) {
  ReferenceEncoderConfig c;
  try {
    c.dim = j.at("dim").get<int>();
    c.heads = j.at("heads").get<int>();
    c.mlp_hidden = j.at("mlp_hidden").get<int>();
    c.num_blocks = j.at("num_blocks").get<int>();
    c.input_t = j.at("input_t").get<int>();
    c.input_h = j.at("input_h").get<int>();
    c.input_w = j.at("input_w").get<int>();
    c.patch_t = j.at("patch_t").get<int>();
    c.patch_h = j.at("patch_h").get<int>();
    c.patch_w = j.at("patch_w").get<int>();
    c.reduction = token_reduction_from_string(j.at("reduction").get<std::string>());
    c.init_seed = j.at("init_seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed encoder config: ") + e.what());
  }
  return c;
}

// Inference-mode encoding: deterministic, no dropout, no gradients.
inline MotionToken encode_joint_clip(EncoderAdapter& adapter, const Clip& clip) {
  Tape tape;
  const Var token = adapter.encode(tape, clip, FwdCtx{});
  const Tensor& v = tape.val(token);
  return MotionToken(v.data.begin(), v.data.end());
}

// Injects LoRA into the last cfg.target_blocks blocks (q/k/v + feed-forward
// linears) and freezes the base weights. Returns the adapter count.
inline int inject_lora(EncoderAdapter& adapter, const LoraConfig& cfg, Rng& rng) {
  const int count = inject_lora_into_blocks(adapter.blocks(), cfg, adapter.params(), rng);
  adapter.set_trainable(false);
  return count;
}

// Collapses and removes all adapters (W <- W + (alpha/r) B A per layer).
inline void merge_all_lora(EncoderAdapter& adapter) {
  for (TransformerBlock* b : adapter.blocks())
    for (Linear* l : b->adaptable_linears()) merge_lora(*l);
}

}  // namespace jattn
