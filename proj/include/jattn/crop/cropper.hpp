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
#include <cstdint>
#include <string>
#include <vector>

#include "jattn/core/errors.hpp"
#include "jattn/core/image.hpp"
#include "jattn/core/tensor.hpp"
#include "jattn/ingest/frame_source.hpp"
#include "jattn/ingest/keypoints.hpp"
#include "jattn/segment/segmenter.hpp"

namespace jattn {

inline constexpr int kCropSize = 120;  // h = w, fixed window

// One joint's clip: T frames of crop_size x crop_size x 3, uint8.
struct Clip {
  int frames = 0;
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> data;

  Clip() = default;
  Clip(int t, int h, int w)
      : frames(t), height(h), width(w),
        data(static_cast<std::size_t>(t) * h * w * 3, 0) {}

  std::uint8_t& at(int t, int y, int x, int c) {
    return data[((static_cast<std::size_t>(t) * height + y) * width + x) * 3 + c];
  }
  std::uint8_t at(int t, int y, int x, int c) const {
    return data[((static_cast<std::size_t>(t) * height + y) * width + x) * 3 + c];
  }
};

// All J joint clips of one segment, plus the crop centers actually used
// (original-frame pixels) and per-frame presence flags.
struct JointClipSet {
  std::string video_id;
  double start_s = 0.0;
  int joints = 0;
  int frames = 0;
  std::vector<Clip> clips;          // [joints]
  Tensor coords;                    // (J, T, 2), crop centers, pre-rounding
  std::vector<std::uint8_t> present;  // (J*T), keypoint presence at used frames
  std::vector<int> all_missing_joints;  // joints absent in every frame

  double coord(int j, int t, int axis) const {
    return coords.data[(static_cast<std::size_t>(j) * frames + t) * 2 + axis];
  }
  bool is_present(int j, int t) const {
    return present[static_cast<std::size_t>(j) * frames + t] != 0;
  }
};

// (J, T, 3) positional tensor: x/W, y/H, and joint identity j/(J-1).
struct PositionalTensor {
  Tensor values;  // shape (J, T, 3)

  double at(int j, int t, int c) const {
    const std::size_t tdim = values.shape[1];
    return values.data[(static_cast<std::size_t>(j) * tdim + t) * 3 + c];
  }
};

namespace detail {

// Resolves the crop center per frame: the keypoint itself when present,
// otherwise the most recent present coordinate (or the first present one for
// leading gaps). Joints absent in the whole segment land at the frame center.
inline void held_coordinates(const std::vector<const Joint*>& track, double cx_fallback,
                             double cy_fallback, std::vector<double>& xs,
                             std::vector<double>& ys, std::vector<bool>& present,
                             bool& all_missing) {
  const int T = static_cast<int>(track.size());
  xs.assign(T, 0.0);
  ys.assign(T, 0.0);
  present.assign(T, false);
  int first_present = -1;
  for (int t = 0; t < T; ++t) {
    if (track[t]->present) {
      present[t] = true;
      if (first_present < 0) first_present = t;
    }
  }
  all_missing = first_present < 0;
  if (all_missing) {
    for (int t = 0; t < T; ++t) {
      xs[t] = cx_fallback;
      ys[t] = cy_fallback;
    }
    return;
  }
  double hx = track[first_present]->x;
  double hy = track[first_present]->y;
  for (int t = 0; t < T; ++t) {
    if (present[t]) {
      hx = track[t]->x;
      hy = track[t]->y;
    }
    xs[t] = hx;
    ys[t] = hy;
  }
}

// Copies the crop window centered at the rounded coordinate; regions outside
// the frame stay zero.
inline void crop_into(const Image8& frame, double center_x, double center_y,
                      Clip& clip, int t) {
  const int half = clip.width / 2;
  const long cx = std::lround(center_x);
  const long cy = std::lround(center_y);
  const long x0 = cx - half;
  const long y0 = cy - half;
  const long xs = std::max(0L, x0);
  const long xe = std::min(static_cast<long>(frame.width), x0 + clip.width);
  const long ys = std::max(0L, y0);
  const long ye = std::min(static_cast<long>(frame.height), y0 + clip.height);
  for (long y = ys; y < ye; ++y) {
    const std::uint8_t* src = &frame.data[(static_cast<std::size_t>(y) * frame.width + xs) * 3];
    std::uint8_t* dst = &clip.data[((static_cast<std::size_t>(t) * clip.height +
                                     (y - y0)) * clip.width + (xs - x0)) * 3];
    std::copy(src, src + (xe - xs) * 3, dst);
  }
}

}  // namespace detail

struct JointClipResult {
  Clip clip;
  std::vector<double> xs, ys;  // crop centers used, original-frame pixels
  std::vector<bool> present;
  bool all_missing = false;
};

// Extracts one joint's clip for a segment: a fixed 120x120 window centered at
// the rounded joint coordinate in each of the segment's downsampled frames.
inline JointClipResult extract_joint_clip(const FrameSource& source,
                                          const SegmentSpec& seg,
                                          const std::vector<KeypointFrame>& keypoints,
                                          int joint_id, int crop_size = kCropSize) {
  if (joint_id < 0 || joint_id >= kNumJoints)
    throw ConfigError("joint_id out of range: " + std::to_string(joint_id));
  const int T = static_cast<int>(seg.frame_indices.size());
  std::vector<const Joint*> track(T);
  for (int t = 0; t < T; ++t) {
    const std::int64_t fi = seg.frame_indices[t];
    if (fi < 0 || fi >= static_cast<std::int64_t>(keypoints.size()))
      throw DataError(seg.video_id + ": segment at " + std::to_string(seg.start_s) +
                      " s needs keypoints for frame " + std::to_string(fi) +
                      " but only " + std::to_string(keypoints.size()) + " are available");
    track[t] = &keypoints[static_cast<std::size_t>(fi)].joints[joint_id];
  }

  JointClipResult res;
  res.clip = Clip(T, crop_size, crop_size);
  std::vector<bool> present;
  detail::held_coordinates(track, source.width() / 2.0, source.height() / 2.0,
                           res.xs, res.ys, present, res.all_missing);
  res.present = present;
  for (int t = 0; t < T; ++t) {
    const Image8 frame = source.frame(seg.frame_indices[t]);
    detail::crop_into(frame, res.xs[t], res.ys[t], res.clip, t);
  }
  return res;
}

// Extracts all 14 joints of one segment. Frames are decoded once and shared
// across joints.
inline JointClipSet extract_clipset(const FrameSource& source, const SegmentSpec& seg,
                                    const std::vector<KeypointFrame>& keypoints,
                                    int crop_size = kCropSize) {
  const int T = static_cast<int>(seg.frame_indices.size());
  const int J = kNumJoints;
  JointClipSet set;
  set.video_id = seg.video_id;
  set.start_s = seg.start_s;
  set.joints = J;
  set.frames = T;
  set.clips.assign(J, Clip(T, crop_size, crop_size));
  set.coords = Tensor({static_cast<std::size_t>(J), static_cast<std::size_t>(T), 2});
  set.present.assign(static_cast<std::size_t>(J) * T, 0);

  std::vector<std::vector<double>> xs(J), ys(J);
  std::vector<std::vector<bool>> present(J);
  for (int j = 0; j < J; ++j) {
    std::vector<const Joint*> track(T);
    for (int t = 0; t < T; ++t) {
      const std::int64_t fi = seg.frame_indices[t];
      if (fi < 0 || fi >= static_cast<std::int64_t>(keypoints.size()))
        throw DataError(seg.video_id + ": segment at " + std::to_string(seg.start_s) +
                        " s needs keypoints for frame " + std::to_string(fi) +
                        " but only " + std::to_string(keypoints.size()) + " are available");
      track[t] = &keypoints[static_cast<std::size_t>(fi)].joints[j];
    }
    bool all_missing = false;
    detail::held_coordinates(track, source.width() / 2.0, source.height() / 2.0,
                             xs[j], ys[j], present[j], all_missing);
    if (all_missing) set.all_missing_joints.push_back(j);
    for (int t = 0; t < T; ++t) {
      set.coords.data[(static_cast<std::size_t>(j) * T + t) * 2 + 0] = xs[j][t];
      set.coords.data[(static_cast<std::size_t>(j) * T + t) * 2 + 1] = ys[j][t];
      set.present[static_cast<std::size_t>(j) * T + t] = present[j][t] ? 1 : 0;
    }
  }

  for (int t = 0; t < T; ++t) {
    const Image8 frame = source.frame(seg.frame_indices[t]);
    for (int j = 0; j < J; ++j)
      detail::crop_into(frame, xs[j][t], ys[j][t], set.clips[j], t);
  }
  return set;
}

// Builds the (J, T, 3) positional tensor from the clip set's crop centers.
// Channels: x/W, y/H in [0,1], joint identity j/(J-1). Joints that were
// absent in every frame sit at the frame center, i.e. (0.5, 0.5); callers see
// them in clipset.all_missing_joints (the segment quality report).
inline PositionalTensor build_positional_tensor(const JointClipSet& set, int height,
                                                int width) {
  if (set.coords.numel() == 0)
    throw ShapeError("build_positional_tensor: clip set has no coordinates");
  const int J = set.joints;
  const int T = set.frames;
  PositionalTensor pos;
  pos.values = Tensor({static_cast<std::size_t>(J), static_cast<std::size_t>(T), 3});
  for (int j = 0; j < J; ++j) {
    const double id = J > 1 ? static_cast<double>(j) / (J - 1) : 0.0;
    for (int t = 0; t < T; ++t) {
      const std::size_t base = (static_cast<std::size_t>(j) * T + t) * 3;
      pos.values.data[base + 0] = set.coord(j, t, 0) / width;
      pos.values.data[base + 1] = set.coord(j, t, 1) / height;
      pos.values.data[base + 2] = id;
    }
  }
  return pos;
}

// Flattens the (T,3) slice of each joint into one row: (J, 3*T), t-major.
// This is the layout the positional projection consumes.
inline Tensor flatten_positional(const PositionalTensor& pos) {
  const std::size_t J = pos.values.shape[0];
  const std::size_t T = pos.values.shape[1];
  Tensor flat({J, T * 3});
  flat.data = pos.values.data;
  return flat;
}

}  // namespace jattn
