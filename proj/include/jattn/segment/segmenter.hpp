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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "jattn/core/errors.hpp"
#include "jattn/core/random.hpp"
#include "jattn/ingest/annotations.hpp"

namespace jattn {

// Segment geometry and labeling windows. Defaults: 5 s windows over 30 fps
// video downsampled to 6 fps (30 frames per segment), ictal label window of
// 40 s after clinical onset.
struct SegmentRules {
  double length_s = 5.0;
  double native_fps = 30.0;
  double target_fps = 6.0;
  double ictal_window_s = 40.0;

  int frames_per_segment() const {
    return static_cast<int>(std::llround(length_s * target_fps));
  }
  int frame_stride() const {
    const double ratio = native_fps / target_fps;
    const int stride = static_cast<int>(std::llround(ratio));
    if (std::abs(ratio - stride) > 1e-9 || stride < 1)
      throw ConfigError("native fps must be an integer multiple of target fps");
    return stride;
  }
};

struct SegmentSpec {
  std::string video_id;
  double start_s = 0.0;
  double length_s = 5.0;
  double native_fps = 30.0;
  double target_fps = 6.0;
  std::vector<std::int64_t> frame_indices;  // native indices after downsampling

  double end_s() const { return start_s + length_s; }
};

enum class SegmentLabel { kInterictal, kIctal, kExcluded };

inline const char* to_string(SegmentLabel l) {
  switch (l) {
    case SegmentLabel::kInterictal: return "interictal";
    case SegmentLabel::kIctal: return "ictal";
    case SegmentLabel::kExcluded: return "excluded";
  }
  return "?";
}

inline SegmentLabel segment_label_from_string(const std::string& s) {
  if (s == "interictal") return SegmentLabel::kInterictal;
  if (s == "ictal") return SegmentLabel::kIctal;
  if (s == "excluded") return SegmentLabel::kExcluded;
  throw ParseError("unknown segment label: " + s);
}

// Tiles [0, duration - length] at the given stride. Each segment carries the
// native frame indices it samples: frames_per_segment() indices starting at
// round(start_s * native_fps), spaced by the native/target fps ratio.
// Videos shorter than one segment yield an empty sequence.
inline std::vector<SegmentSpec> build_segments(const OnsetAnnotation& ann,
                                               double stride_s,
                                               const SegmentRules& rules = {}) {
  if (stride_s <= 0) throw ConfigError("stride_s must be positive");
  const int frames = rules.frames_per_segment();
  const int stride = rules.frame_stride();

  std::vector<SegmentSpec> out;
  const double last_start = ann.duration_s - rules.length_s;
  // Small epsilon so that duration 100 at stride 5 includes start 95 even
  // after accumulated floating point error.
  for (int k = 0;; ++k) {
    const double start = k * stride_s;
    if (start > last_start + 1e-9) break;
    SegmentSpec seg;
    seg.video_id = ann.video_id;
    seg.start_s = start;
    seg.length_s = rules.length_s;
    seg.native_fps = rules.native_fps;
    seg.target_fps = rules.target_fps;
    const std::int64_t first = std::llround(start * rules.native_fps);
    seg.frame_indices.reserve(frames);
    for (int i = 0; i < frames; ++i)
      seg.frame_indices.push_back(first + static_cast<std::int64_t>(i) * stride);
    out.push_back(std::move(seg));
  }
  return out;
}

// Label rules:
//   interictal  iff the segment ends at or before the EEG onset,
//   ictal       iff the segment starts within [clinical, clinical + 40 s),
//   excluded    otherwise (spans the EEG onset, falls in the pre-motor gap,
//               or starts after the ictal window closes).
// Excluded segments are dropped from train/test pools but still counted.
inline SegmentLabel label_segment(const SegmentSpec& seg, const OnsetAnnotation& ann,
                                  const SegmentRules& rules = {}) {
  if (seg.video_id != ann.video_id)
    throw DataError("label_segment: annotation for " + ann.video_id +
                    " applied to segment of " + seg.video_id);
  if (seg.end_s() <= ann.eeg_onset_s) return SegmentLabel::kInterictal;
  if (seg.start_s >= ann.clinical_onset_s &&
      seg.start_s < ann.clinical_onset_s + rules.ictal_window_s)
    return SegmentLabel::kIctal;
  return SegmentLabel::kExcluded;
}

// Subject-wise split. Disjoint by construction; deterministic per seed.
struct SplitManifest {
  std::vector<std::string> train_subjects;
  std::vector<std::string> test_subjects;
  std::uint64_t seed = 0;
  // per-split counts by label, filled in once segments are known
  std::map<std::string, std::map<std::string, std::int64_t>> label_counts;

  bool is_train_subject(const std::string& s) const {
    return std::find(train_subjects.begin(), train_subjects.end(), s) !=
           train_subjects.end();
  }
  bool is_test_subject(const std::string& s) const {
    return std::find(test_subjects.begin(), test_subjects.end(), s) !=
           test_subjects.end();
  }
};

inline SplitManifest make_split(std::vector<std::string> subjects,
                                std::size_t n_test, std::uint64_t seed) {
  std::sort(subjects.begin(), subjects.end());
  subjects.erase(std::unique(subjects.begin(), subjects.end()), subjects.end());
  if (n_test >= subjects.size())
    throw ConfigError("n_test (" + std::to_string(n_test) +
                      ") must be smaller than the subject count (" +
                      std::to_string(subjects.size()) + ")");
  Rng rng(mix_seed(seed, 0x5eedULL));
  rng.shuffle(subjects);
  SplitManifest m;
  m.seed = seed;
  m.test_subjects.assign(subjects.begin(), subjects.begin() + n_test);
  m.train_subjects.assign(subjects.begin() + n_test, subjects.end());
  std::sort(m.test_subjects.begin(), m.test_subjects.end());
  std::sort(m.train_subjects.begin(), m.train_subjects.end());
  return m;
}

inline nlohmann::json split_to_json(const SplitManifest& m) {
  return {{"seed", m.seed},
          {"train_subjects", m.train_subjects},
          {"test_subjects", m.test_subjects},
          {"label_counts", m.label_counts}};
}

inline SplitManifest split_from_json(const nlohmann::json& j) {
  SplitManifest m;
  try {
    m.seed = j.at("seed").get<std::uint64_t>();
    m.train_subjects = j.at("train_subjects").get<std::vector<std::string>>();
    m.test_subjects = j.at("test_subjects").get<std::vector<std::string>>();
    if (j.contains("label_counts"))
      m.label_counts = j.at("label_counts")
                           .get<std::map<std::string, std::map<std::string, std::int64_t>>>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed split manifest: ") + e.what());
  }
  for (const auto& s : m.train_subjects)
    if (m.is_test_subject(s))
      throw ValidationError("split manifest: subject " + s + " in both splits");
  return m;
}

inline void write_split(const std::filesystem::path& path, const SplitManifest& m) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open for write: " + path.string());
  out << split_to_json(m).dump(2) << "\n";
}

inline SplitManifest read_split(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open split manifest: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return split_from_json(j);
}

}  // namespace jattn
