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
#include <memory>
#include <string>
#include <vector>

#include "jattn/core/parallel.hpp"
#include "jattn/crop/cropper.hpp"
#include "jattn/ingest/annotations.hpp"
#include "jattn/ingest/frame_source.hpp"
#include "jattn/ingest/keypoints.hpp"
#include "jattn/model/encoder.hpp"
#include "jattn/synth/generator.hpp"
#include "jattn/train/trainer.hpp"

namespace jattn {

// On-disk dataset layout (written by the synthesizer, read by everything):
//   root/annotations.json
//   root/manifest.json
//   root/videos/<video_id>/keypoints.jsonl
//   root/videos/<video_id>/frames/frame_000000.ppm...   (materialized), or
//   root/videos/<video_id>/scene.json                   (procedural)
struct VideoEntry {
  OnsetAnnotation annotation;
  std::filesystem::path dir;
};

struct Dataset {
  std::filesystem::path root;
  std::vector<VideoEntry> videos;

  const VideoEntry& video(const std::string& video_id) const {
    for (const auto& v : videos)
      if (v.annotation.video_id == video_id) return v;
    throw DataError("dataset has no video " + video_id);
  }

  std::vector<std::string> subjects() const {
    std::vector<std::string> out;
    for (const auto& v : videos) out.push_back(v.annotation.subject_id);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }
};

inline Dataset load_dataset(const std::filesystem::path& root) {
  Dataset ds;
  ds.root = root;
  const auto anns = read_annotations(root / "annotations.json");
  for (const auto& ann : anns) {
    VideoEntry entry;
    entry.annotation = ann;
    entry.dir = root / "videos" / ann.video_id;
    if (!std::filesystem::exists(entry.dir / "keypoints.jsonl"))
      throw DataError("missing keypoints for video " + ann.video_id + " (expected " +
                      (entry.dir / "keypoints.jsonl").string() + ")");
    ds.videos.push_back(std::move(entry));
  }
  return ds;
}

// Materialized frames win over the procedural scene when both exist.
inline std::unique_ptr<FrameSource> open_frame_source(const VideoEntry& entry) {
  const auto frames_dir = entry.dir / "frames";
  if (std::filesystem::exists(frames_dir))
    return std::make_unique<ImageDirFrameSource>(entry.annotation.video_id, frames_dir);
  const auto scene_path = entry.dir / "scene.json";
  if (std::filesystem::exists(scene_path)) {
    std::ifstream in(scene_path);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(scene_path.string() + ": " + e.what());
    }
    // scene keypoints are always full-confidence ground truth
    auto keypoints = read_keypoints(entry.dir / "keypoints.jsonl", 0.0);
    return std::make_unique<SceneFrameSource>(scene_from_json(j), std::move(keypoints));
  }
  throw DataError(entry.annotation.video_id +
                  ": no frame source (neither frames/ nor scene.json under " +
                  entry.dir.string() + ")");
}

struct LabeledSegment {
  SegmentSpec spec;
  SegmentLabel label = SegmentLabel::kExcluded;
  std::string subject_id;
};

inline std::vector<LabeledSegment> collect_labeled_segments(
    const Dataset& ds, double stride_s, const SegmentRules& rules = {}) {
  std::vector<LabeledSegment> out;
  for (const auto& v : ds.videos) {
    for (auto& seg : build_segments(v.annotation, stride_s, rules)) {
      LabeledSegment ls;
      ls.label = label_segment(seg, v.annotation, rules);
      ls.spec = std::move(seg);
      ls.subject_id = v.annotation.subject_id;
      out.push_back(std::move(ls));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Clip archive: preprocessing cache with one record per segment holding the
// full J x T x 120 x 120 x 3 clip stack, crop coordinates, presence mask,
// label and provenance. Round trips are bit exact.

inline constexpr std::uint32_t kArchiveMagic = 0x4143414a;  // "JACA"
inline constexpr std::uint32_t kArchiveVersion = 1;

struct ArchiveRecord {
  JointClipSet clipset;
  SegmentLabel label = SegmentLabel::kExcluded;
  std::string subject_id;
  int frame_height = 0;  // source frame geometry, for positional channels
  int frame_width = 0;
};

class ClipArchiveWriter {
 public:
  explicit ClipArchiveWriter(const std::filesystem::path& path) : w_(path) {
    w_.u32(kArchiveMagic);
    w_.u32(kArchiveVersion);
  }

  void add(const ArchiveRecord& rec) {
    const JointClipSet& set = rec.clipset;
    w_.str(set.video_id);
    w_.str(rec.subject_id);
    w_.u32(static_cast<std::uint32_t>(rec.frame_height));
    w_.u32(static_cast<std::uint32_t>(rec.frame_width));
    w_.f64(set.start_s);
    w_.u8(static_cast<std::uint8_t>(rec.label));
    w_.u32(static_cast<std::uint32_t>(set.joints));
    w_.u32(static_cast<std::uint32_t>(set.frames));
    w_.u32(static_cast<std::uint32_t>(set.clips.at(0).height));
    w_.u32(static_cast<std::uint32_t>(set.clips.at(0).width));
    w_.tensor(set.coords);
    w_.bytes(set.present);
    w_.u32(static_cast<std::uint32_t>(set.all_missing_joints.size()));
    for (int j : set.all_missing_joints) w_.u32(static_cast<std::uint32_t>(j));
    for (const auto& clip : set.clips) w_.bytes(clip.data);
  }

 private:
  BinWriter w_;
};

inline std::vector<ArchiveRecord> read_clip_archive(const std::filesystem::path& path) {
  BinReader r(path);
  if (r.u32() != kArchiveMagic) throw ParseError(path.string() + ": not a clip archive");
  if (r.u32() != kArchiveVersion)
    throw ParseError(path.string() + ": unsupported archive version");
  std::vector<ArchiveRecord> out;
  while (!r.at_eof()) {
    ArchiveRecord rec;
    JointClipSet& set = rec.clipset;
    set.video_id = r.str();
    rec.subject_id = r.str();
    rec.frame_height = static_cast<int>(r.u32());
    rec.frame_width = static_cast<int>(r.u32());
    set.start_s = r.f64();
    rec.label = static_cast<SegmentLabel>(r.u8());
    set.joints = static_cast<int>(r.u32());
    set.frames = static_cast<int>(r.u32());
    const int h = static_cast<int>(r.u32());
    const int w = static_cast<int>(r.u32());
    set.coords = r.tensor();
    set.present = r.bytes();
    const std::uint32_t n_missing = r.u32();
    for (std::uint32_t i = 0; i < n_missing; ++i)
      set.all_missing_joints.push_back(static_cast<int>(r.u32()));
    set.clips.reserve(static_cast<std::size_t>(set.joints));
    for (int j = 0; j < set.joints; ++j) {
      Clip clip(set.frames, h, w);
      clip.data = r.bytes();
      if (clip.data.size() != static_cast<std::size_t>(set.frames) * h * w * 3)
        throw ParseError(path.string() + ": clip payload size mismatch");
      set.clips.push_back(std::move(clip));
    }
    out.push_back(std::move(rec));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Token encoding with an optional on-disk cache (frozen-mode epochs must not
// re-run the encoder).

// (J, d) tokens for all clips of a segment; joints encode in parallel.
inline Tensor tokens_for_clipset(EncoderAdapter& encoder, const JointClipSet& set) {
  const auto J = static_cast<std::size_t>(set.joints);
  Tensor tokens({J, static_cast<std::size_t>(encoder.dim())});
  parallel_for(J, [&](std::size_t j) {
    const MotionToken tok = encode_joint_clip(encoder, set.clips[j]);
    std::copy(tok.begin(), tok.end(), tokens.data.begin() + j * tok.size());
  });
  return tokens;
}

inline std::uint64_t clipset_content_hash(const JointClipSet& set) {
  std::uint64_t h = fnv1a_str(set.video_id);
  h = fnv1a(&set.start_s, sizeof(set.start_s), h);
  for (const auto& clip : set.clips) h = fnv1a(clip.data.data(), clip.data.size(), h);
  return h;
}

// Returns cached tokens when a cache directory is set and warm; encodes and
// fills the cache otherwise. Cache keys cover encoder weights and clip bytes.
inline Tensor tokens_for_clipset_cached(EncoderAdapter& encoder,
                                        const JointClipSet& set,
                                        const std::filesystem::path& cache_dir) {
  if (cache_dir.empty()) return tokens_for_clipset(encoder, set);
  std::filesystem::create_directories(cache_dir);
  const std::uint64_t key =
      splitmix64(encoder.base_value_hash() ^ clipset_content_hash(set));
  char name[32];
  std::snprintf(name, sizeof(name), "%016llx.tok", static_cast<unsigned long long>(key));
  const auto path = cache_dir / name;
  if (std::filesystem::exists(path)) {
    BinReader r(path);
    return r.tensor();
  }
  Tensor tokens = tokens_for_clipset(encoder, set);
  BinWriter w(path);
  w.tensor(tokens);
  return tokens;
}

// Builds one training item from a preprocessed record. Frozen mode
// precomputes tokens (optionally via the cache); lora mode keeps the clips.
inline TrainItem make_train_item(const ArchiveRecord& rec, EncoderAdapter* encoder,
                                 TrainMode mode,
                                 const std::filesystem::path& cache_dir = {}) {
  if (rec.label == SegmentLabel::kExcluded)
    throw DataError("excluded segments cannot become training items");
  if (rec.frame_height <= 0 || rec.frame_width <= 0)
    throw DataError(rec.clipset.video_id + ": archive record lacks frame geometry");
  TrainItem item;
  item.video_id = rec.clipset.video_id;
  item.subject_id = rec.subject_id;
  item.start_s = rec.clipset.start_s;
  item.label = rec.label == SegmentLabel::kIctal ? 1 : 0;
  item.pos_flat = flatten_positional(
      build_positional_tensor(rec.clipset, rec.frame_height, rec.frame_width));
  if (mode == TrainMode::kFrozen) {
    if (!encoder) throw ConfigError("make_train_item: frozen mode needs an encoder");
    item.tokens = tokens_for_clipset_cached(*encoder, rec.clipset, cache_dir);
  } else {
    item.clips = std::make_shared<JointClipSet>(rec.clipset);
  }
  return item;
}

}  // namespace jattn
