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

#include <cstdio>
#include <filesystem>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "jattn/core/errors.hpp"
#include "jattn/core/image.hpp"

namespace jattn {

// Random access to the frames of one video at native fps. Implementations
// must be lazy (EMU recordings run for hours) and safe for concurrent reads
// of distinct frame indices.
class FrameSource {
 public:
  virtual ~FrameSource() = default;

  virtual const std::string& video_id() const = 0;
  virtual int height() const = 0;
  virtual int width() const = 0;
  virtual std::int64_t frame_count() const = 0;

  // Frame indices are dense 0..frame_count()-1.
  virtual Image8 frame(std::int64_t index) const = 0;

 protected:
  void check_index(std::int64_t index) const {
    if (index < 0 || index >= frame_count())
      throw DataError(video_id() + ": frame index " + std::to_string(index) +
                      " beyond source length " + std::to_string(frame_count()));
  }
};

// All frames held in memory. Test fixture and small-dataset adapter.
class MemoryFrameSource : public FrameSource {
 public:
  MemoryFrameSource(std::string video_id, std::vector<Image8> frames)
      : video_id_(std::move(video_id)), frames_(std::move(frames)) {
    if (frames_.empty()) throw DataError(video_id_ + ": no frames");
  }

  const std::string& video_id() const override { return video_id_; }
  int height() const override { return frames_[0].height; }
  int width() const override { return frames_[0].width; }
  std::int64_t frame_count() const override {
    return static_cast<std::int64_t>(frames_.size());
  }
  Image8 frame(std::int64_t index) const override {
    check_index(index);
    return frames_[static_cast<std::size_t>(index)];
  }

  std::vector<Image8>& mutable_frames() { return frames_; }

 private:
  std::string video_id_;
  std::vector<Image8> frames_;
};

// Directory of numbered image files, frame_000000.ppm .. frame_NNNNNN.ppm.
// Frames are decoded on access, never cached.
class ImageDirFrameSource : public FrameSource {
 public:
  ImageDirFrameSource(std::string video_id, std::filesystem::path dir)
      : video_id_(std::move(video_id)), dir_(std::move(dir)) {
    std::int64_t n = 0;
    while (std::filesystem::exists(frame_path(dir_, n))) ++n;
    if (n == 0)
      throw DataError(video_id_ + ": no frames found under " + dir_.string());
    count_ = n;
    const Image8 first = read_ppm(frame_path(dir_, 0));
    height_ = first.height;
    width_ = first.width;
  }

  static std::filesystem::path frame_path(const std::filesystem::path& dir,
                                          std::int64_t index) {
    char name[32];
    std::snprintf(name, sizeof(name), "frame_%06lld.ppm",
                  static_cast<long long>(index));
    return dir / name;
  }

  const std::string& video_id() const override { return video_id_; }
  int height() const override { return height_; }
  int width() const override { return width_; }
  std::int64_t frame_count() const override { return count_; }

  Image8 frame(std::int64_t index) const override {
    check_index(index);
    Image8 img = read_ppm(frame_path(dir_, index));
    if (img.height != height_ || img.width != width_)
      throw DataError(video_id_ + ": frame " + std::to_string(index) +
                      " geometry differs from frame 0");
    return img;
  }

 private:
  std::string video_id_;
  std::filesystem::path dir_;
  std::int64_t count_ = 0;
  int height_ = 0;
  int width_ = 0;
};

}  // namespace jattn
