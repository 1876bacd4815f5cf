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

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "jattn/core/binio.hpp"
#include "jattn/nn/graph.hpp"

namespace jattn {

// Project checkpoint container: named double tensors plus one JSON metadata
// string (config echo, seed, epoch, validation snapshot). Values round-trip
// bit exactly.
struct CheckpointData {
  std::vector<std::pair<std::string, Tensor>> tensors;
  std::string meta_json;

  const Tensor* find(const std::string& name) const {
    for (const auto& [n, t] : tensors)
      if (n == name) return &t;
    return nullptr;
  }
};

inline constexpr std::uint32_t kCheckpointMagic = 0x4e54414a;  // "JATN"
inline constexpr std::uint32_t kCheckpointVersion = 1;

inline void save_checkpoint(const std::filesystem::path& path,
                            const CheckpointData& data) {
  BinWriter w(path);
  w.u32(kCheckpointMagic);
  w.u32(kCheckpointVersion);
  w.str(data.meta_json);
  w.u64(data.tensors.size());
  for (const auto& [name, tensor] : data.tensors) {
    w.str(name);
    w.tensor(tensor);
  }
}

inline CheckpointData load_checkpoint(const std::filesystem::path& path) {
  BinReader r(path);
  if (r.u32() != kCheckpointMagic)
    throw ParseError(path.string() + ": not a checkpoint file");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion)
    throw ParseError(path.string() + ": unsupported checkpoint version " +
                     std::to_string(version));
  CheckpointData data;
  data.meta_json = r.str();
  const std::uint64_t n = r.u64();
  data.tensors.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    std::string name = r.str();
    data.tensors.emplace_back(std::move(name), r.tensor());
  }
  return data;
}

template <typename Pred>
void collect_params(ParamStore& store, CheckpointData& out, Pred keep) {
  for (Param* p : store.all())
    if (keep(*p)) out.tensors.emplace_back(p->name, p->value);
}

inline void collect_all_params(ParamStore& store, CheckpointData& out) {
  collect_params(store, out, [](const Param&) { return true; });
}

// Copies checkpoint values into matching parameters. Every checkpoint tensor
// whose name exists in the store must match shapes; returns how many were
// restored.
inline std::size_t restore_params(ParamStore& store, const CheckpointData& data) {
  std::size_t restored = 0;
  for (const auto& [name, tensor] : data.tensors) {
    Param* p = store.find(name);
    if (!p) continue;
    if (p->value.shape != tensor.shape)
      throw ShapeError("checkpoint tensor " + name + " has shape " +
                       tensor.shape_str() + ", model expects " +
                       p->value.shape_str());
    p->value = tensor;
    ++restored;
  }
  return restored;
}

}  // namespace jattn
