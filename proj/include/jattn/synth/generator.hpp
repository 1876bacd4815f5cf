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
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include <json.hpp>

#include "jattn/core/errors.hpp"
#include "jattn/core/image.hpp"
#include "jattn/core/random.hpp"
#include "jattn/ingest/annotations.hpp"
#include "jattn/ingest/frame_source.hpp"
#include "jattn/ingest/keypoints.hpp"
#include "jattn/segment/segmenter.hpp"

namespace jattn {

// Synthetic articulated-figure datasets: keypoint trajectories with
// controllable rhythmic "seizure" motion, rendered onto per-video textures
// that are deliberately correlated with subject identity. Keypoint files,
// annotations, and frames come out in exactly the ingestion formats, so the
// whole pipeline runs on them unchanged.
struct SynthConfig {
  int n_subjects = 8;
  int videos_per_subject = 1;
  double duration_s = 60.0;
  int frame_height = 360;
  int frame_width = 480;
  double fps = 30.0;
  double ictal_freq_lo_hz = 2.0;
  double ictal_freq_hi_hz = 5.0;
  double ictal_amplitude_px = 25.0;
  double interictal_jitter_px = 1.5;
  double drift_amplitude_px = 8.0;        // slow whole-body sway
  double ictal_motion_s = 45.0;           // rhythmic motion span after clinical onset
  double background_drift_px_s = 2.0;     // subject-specific slow camera-like drift
  double pixel_noise = 2.0;               // uniform sensor noise, gray levels
  double figure_half_height_px = 0.0;     // 0 = fit automatically
  int min_coupled_joints = 3;
  bool in_bounds = true;                  // keypoints keep >= crop-half margin
  std::uint64_t seed = 1;

  void validate() const {
    if (n_subjects < 1 || videos_per_subject < 1)
      throw ConfigError("synth: need at least one subject and one video");
    if (duration_s < 20.0)
      throw ConfigError("synth: duration must be >= 20 s to fit both phases");
    if (ictal_amplitude_px <= interictal_jitter_px)
      throw ConfigError(
          "synth: ictal amplitude must exceed interictal jitter (classes must "
          "be separable by construction)");
    if (ictal_freq_lo_hz <= 0 || ictal_freq_hi_hz < ictal_freq_lo_hz)
      throw ConfigError("synth: bad ictal frequency band");
    if (ictal_freq_hi_hz >= fps / 2.0)
      throw ConfigError("synth: ictal band exceeds the native Nyquist rate");
    if (min_coupled_joints < 3 || min_coupled_joints > kNumJoints)
      throw ConfigError("synth: coupled joint count must be in [3,14]");
    if (frame_height < 32 || frame_width < 32)
      throw ConfigError("synth: frame too small");
  }
};

// Canonical upright skeleton, unit half-height, y pointing down.
inline constexpr double kSkeletonUnits[kNumJoints][2] = {
    {0.00, -1.00},   // head
    {0.00, -0.72},   // neck
    {-0.26, -0.66},  // r_shoulder
    {-0.40, -0.36},  // r_elbow
    {-0.46, -0.06},  // r_wrist
    {0.26, -0.66},   // l_shoulder
    {0.40, -0.36},   // l_elbow
    {0.46, -0.06},   // l_wrist
    {-0.16, 0.02},   // r_hip
    {-0.20, 0.50},   // r_knee
    {-0.22, 0.98},   // r_ankle
    {0.16, 0.02},    // l_hip
    {0.20, 0.50},    // l_knee
    {0.22, 0.98},    // l_ankle
};

inline constexpr int kSkeletonEdges[13][2] = {
    {0, 1},  {1, 2},  {2, 3},  {3, 4},   {1, 5},   {5, 6},  {6, 7},
    {1, 8},  {8, 9},  {9, 10}, {1, 11},  {11, 12}, {12, 13}};

// Everything needed to re-render one video deterministically. Trajectories
// live in the keypoint file; this carries the style and the generative
// ground truth used by tests.
struct SceneParams {
  std::string video_id;
  std::string subject_id;
  int height = 0;
  int width = 0;
  double fps = 30.0;
  double eeg_onset_s = 0.0;
  double clinical_onset_s = 0.0;
  double duration_s = 0.0;
  double osc_end_s = 0.0;
  double osc_freq_hz = 0.0;
  std::vector<int> coupled_joints;

  // rendering style
  std::uint64_t texture_seed = 0;
  double texture_cell_a = 32.0;
  double texture_cell_b = 13.0;
  std::array<double, 3> bg_base{120, 120, 120};
  std::array<double, 3> bg_amp{60, 60, 60};
  double bg_drift_vx = 0.0;  // px/s
  double bg_drift_vy = 0.0;
  double pixel_noise = 2.0;
  std::array<double, 3> body_color{210, 202, 192};
  std::array<double, 3> blob_color{246, 240, 232};
  double blob_radius = 7.0;
  double limb_half_width = 5.0;
};

struct SyntheticVideo {
  SceneParams scene;
  OnsetAnnotation annotation;
  std::vector<KeypointFrame> keypoints;  // true generative coordinates
};

namespace synth_detail {

inline double lattice_value(std::uint64_t seed, std::int64_t i, std::int64_t j) {
  const std::uint64_t h = splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(i) *
                                                       0x9e3779b97f4a7c15ULL ^
                                                       static_cast<std::uint64_t>(j)));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

// Bilinear value noise at one octave.
inline double value_noise(std::uint64_t seed, double x, double y, double cell) {
  const double gx = x / cell, gy = y / cell;
  const auto ix = static_cast<std::int64_t>(std::floor(gx));
  const auto iy = static_cast<std::int64_t>(std::floor(gy));
  const double fx = gx - ix, fy = gy - iy;
  const double v00 = lattice_value(seed, ix, iy);
  const double v10 = lattice_value(seed, ix + 1, iy);
  const double v01 = lattice_value(seed, ix, iy + 1);
  const double v11 = lattice_value(seed, ix + 1, iy + 1);
  const double top = v00 + (v10 - v00) * fx;
  const double bot = v01 + (v11 - v01) * fx;
  return top + (bot - top) * fy;
}

inline std::uint8_t clamp_u8(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

}  // namespace synth_detail

// Renders one frame from scratch: textured drifting background, the stick
// figure at the frame's true keypoints, then sensor noise. Pure function of
// (scene, keypoints, frame_index), which is what makes lazy frame sources
// and bit-exact regeneration possible.
inline Image8 render_scene_frame(const SceneParams& sc,
                                 const std::vector<KeypointFrame>& keypoints,
                                 std::int64_t frame_index) {
  using synth_detail::clamp_u8;
  using synth_detail::value_noise;
  if (frame_index < 0 || frame_index >= static_cast<std::int64_t>(keypoints.size()))
    throw DataError(sc.video_id + ": frame " + std::to_string(frame_index) +
                    " outside generated range");
  const double t = static_cast<double>(frame_index) / sc.fps;
  const double ox = sc.bg_drift_vx * t;
  const double oy = sc.bg_drift_vy * t;

  Image8 img(sc.height, sc.width);
  for (int y = 0; y < sc.height; ++y) {
    for (int x = 0; x < sc.width; ++x) {
      const double na = value_noise(sc.texture_seed, x + ox, y + oy, sc.texture_cell_a);
      const double nb = value_noise(sc.texture_seed ^ 0xabcdULL, x + ox, y + oy,
                                    sc.texture_cell_b);
      const double n = 0.68 * na + 0.32 * nb - 0.5;
      for (int c = 0; c < 3; ++c)
        img.at(y, x, c) = clamp_u8(sc.bg_base[c] + sc.bg_amp[c] * n);
    }
  }

  const auto& joints = keypoints[static_cast<std::size_t>(frame_index)].joints;
  auto draw_capsule = [&](double x0, double y0, double x1, double y1, double hw,
                          const std::array<double, 3>& color) {
    const int xa = std::max(0, static_cast<int>(std::floor(std::min(x0, x1) - hw - 1)));
    const int xb = std::min(sc.width - 1, static_cast<int>(std::ceil(std::max(x0, x1) + hw + 1)));
    const int ya = std::max(0, static_cast<int>(std::floor(std::min(y0, y1) - hw - 1)));
    const int yb = std::min(sc.height - 1, static_cast<int>(std::ceil(std::max(y0, y1) + hw + 1)));
    const double dx = x1 - x0, dy = y1 - y0;
    const double len2 = dx * dx + dy * dy;
    for (int y = ya; y <= yb; ++y)
      for (int x = xa; x <= xb; ++x) {
        double u = len2 > 0 ? ((x - x0) * dx + (y - y0) * dy) / len2 : 0.0;
        u = std::clamp(u, 0.0, 1.0);
        const double px = x0 + u * dx, py = y0 + u * dy;
        const double d2 = (x - px) * (x - px) + (y - py) * (y - py);
        if (d2 <= hw * hw)
          for (int c = 0; c < 3; ++c) img.at(y, x, c) = clamp_u8(color[c]);
      }
  };

  for (const auto& e : kSkeletonEdges)
    draw_capsule(joints[e[0]].x, joints[e[0]].y, joints[e[1]].x, joints[e[1]].y,
                 sc.limb_half_width, sc.body_color);
  for (const auto& j : joints)
    draw_capsule(j.x, j.y, j.x, j.y, sc.blob_radius, sc.blob_color);
  // head gets a larger blob
  draw_capsule(joints[0].x, joints[0].y, joints[0].x, joints[0].y,
               sc.blob_radius * 1.8, sc.blob_color);

  if (sc.pixel_noise > 0.0) {
    const std::uint64_t fs = mix_seed(sc.texture_seed, 0x5e4503ULL,
                                      static_cast<std::uint64_t>(frame_index));
    for (int y = 0; y < sc.height; ++y)
      for (int x = 0; x < sc.width; ++x) {
        const std::uint64_t h = splitmix64(
            fs ^ (static_cast<std::uint64_t>(y) << 32) ^ static_cast<std::uint64_t>(x));
        const double off = (static_cast<double>(h & 0xffff) / 65535.0 - 0.5) * 2.0 *
                           sc.pixel_noise;
        for (int c = 0; c < 3; ++c)
          img.at(y, x, c) = clamp_u8(img.at(y, x, c) + off);
      }
  }
  return img;
}

// Lazily renders frames from the generative description; nothing is stored.
class SceneFrameSource : public FrameSource {
 public:
  SceneFrameSource(SceneParams scene, std::vector<KeypointFrame> keypoints)
      : scene_(std::move(scene)), keypoints_(std::move(keypoints)) {}

  const std::string& video_id() const override { return scene_.video_id; }
  int height() const override { return scene_.height; }
  int width() const override { return scene_.width; }
  std::int64_t frame_count() const override {
    return static_cast<std::int64_t>(keypoints_.size());
  }
  Image8 frame(std::int64_t index) const override {
    check_index(index);
    return render_scene_frame(scene_, keypoints_, index);
  }
  const SceneParams& scene() const { return scene_; }

 private:
  SceneParams scene_;
  std::vector<KeypointFrame> keypoints_;
};

// Generates all videos of one subject. Streams are seeded by
// (seed, subject_index, video_index) only, so subjects can be generated
// concurrently and regeneration is bit exact.
inline std::vector<SyntheticVideo> generate_subject(const SynthConfig& cfg,
                                                    int subject_index) {
  cfg.validate();
  char sid[24];
  std::snprintf(sid, sizeof(sid), "subject%02d", subject_index);

  Rng subject_rng(mix_seed(cfg.seed, 0x5b1ecULL, static_cast<std::uint64_t>(subject_index)));

  // Subject style: background statistics and drift are identity-correlated
  // on purpose; a background-reliant model can latch onto them and will then
  // fail on held-out subjects.
  SceneParams style;
  style.texture_cell_a = subject_rng.uniform(24.0, 56.0);
  style.texture_cell_b = subject_rng.uniform(8.0, 20.0);
  for (int c = 0; c < 3; ++c) {
    style.bg_base[c] = subject_rng.uniform(85.0, 175.0);
    style.bg_amp[c] = subject_rng.uniform(45.0, 115.0);
  }
  {
    const double ang = subject_rng.uniform(0.0, 6.283185307179586);
    const double speed = cfg.background_drift_px_s * subject_rng.uniform(0.6, 1.4);
    style.bg_drift_vx = speed * std::cos(ang);
    style.bg_drift_vy = speed * std::sin(ang);
  }
  for (int c = 0; c < 3; ++c) {
    style.body_color[c] = std::clamp(style.body_color[c] + subject_rng.uniform(-18.0, 18.0), 0.0, 255.0);
  }
  style.pixel_noise = cfg.pixel_noise;

  // Coupled joint subset varies per subject.
  const int n_coupled = cfg.min_coupled_joints +
                        static_cast<int>(subject_rng.below(
                            static_cast<std::uint64_t>(kNumJoints - cfg.min_coupled_joints + 1)));
  std::vector<int> all_joints(kNumJoints);
  for (int j = 0; j < kNumJoints; ++j) all_joints[j] = j;
  subject_rng.shuffle(all_joints);
  std::vector<int> coupled(all_joints.begin(), all_joints.begin() + n_coupled);
  std::sort(coupled.begin(), coupled.end());

  // Figure scale: fit inside the in-bounds margin when requested.
  const double margin = 60.0 + cfg.ictal_amplitude_px + cfg.drift_amplitude_px +
                        cfg.interictal_jitter_px + style.blob_radius * 1.8 + 4.0;
  double scale = cfg.figure_half_height_px;
  if (scale <= 0.0) {
    const double sy = cfg.frame_height / 2.0 - margin;
    const double sx = (cfg.frame_width / 2.0 - margin) / 0.46;
    scale = std::min(sy, sx);
    if (cfg.in_bounds && scale < 16.0)
      throw ConfigError("synth: frame too small for in-bounds figure at this "
                        "amplitude; enlarge the frame or reduce margins");
    scale = std::max(scale, 16.0);
  }

  std::vector<SyntheticVideo> videos;
  for (int vi = 0; vi < cfg.videos_per_subject; ++vi) {
    Rng rng(mix_seed(cfg.seed, 0x71de0ULL, static_cast<std::uint64_t>(subject_index),
                     static_cast<std::uint64_t>(vi)));
    SyntheticVideo vid;
    vid.scene = style;
    char vname[32];
    std::snprintf(vname, sizeof(vname), "s%02d_v%02d", subject_index, vi);
    vid.scene.video_id = vname;
    vid.scene.subject_id = sid;
    vid.scene.height = cfg.frame_height;
    vid.scene.width = cfg.frame_width;
    vid.scene.fps = cfg.fps;
    vid.scene.duration_s = cfg.duration_s;
    vid.scene.texture_seed = mix_seed(cfg.seed, 0x7e87ULL,
                                      static_cast<std::uint64_t>(subject_index),
                                      static_cast<std::uint64_t>(vi));
    vid.scene.coupled_joints = coupled;

    // Onsets: EEG onset in the first half, clinical a few seconds later.
    const double eeg = rng.uniform(0.28, 0.42) * cfg.duration_s;
    const double clinical = std::min(eeg + rng.uniform(2.0, 5.0), cfg.duration_s);
    vid.scene.eeg_onset_s = eeg;
    vid.scene.clinical_onset_s = clinical;
    vid.scene.osc_end_s = std::min(clinical + cfg.ictal_motion_s, cfg.duration_s);
    vid.scene.osc_freq_hz = rng.uniform(cfg.ictal_freq_lo_hz, cfg.ictal_freq_hi_hz);

    vid.annotation.video_id = vid.scene.video_id;
    vid.annotation.subject_id = sid;
    vid.annotation.fps_native = cfg.fps;
    vid.annotation.eeg_onset_s = eeg;
    vid.annotation.clinical_onset_s = clinical;
    vid.annotation.duration_s = cfg.duration_s;

    // Motion program.
    const double cx = cfg.frame_width / 2.0;
    const double cy = cfg.frame_height / 2.0;
    const double sway_fx = rng.uniform(0.05, 0.18), sway_fy = rng.uniform(0.05, 0.18);
    const double sway_px = rng.uniform(0.0, 6.283185307179586);
    const double sway_py = rng.uniform(0.0, 6.283185307179586);
    const double sway_ax = cfg.drift_amplitude_px * rng.uniform(0.5, 1.0);
    const double sway_ay = cfg.drift_amplitude_px * rng.uniform(0.3, 0.8);

    struct JointMotion {
      double wander_ax, wander_ay, wander_fx, wander_fy, wander_px, wander_py;
      double osc_ax = 0.0, osc_ay = 0.0;  // oscillation direction * amplitude
    };
    std::array<JointMotion, kNumJoints> motion{};
    const double wander_amp = std::min(2.0, cfg.drift_amplitude_px * 0.25);
    for (int j = 0; j < kNumJoints; ++j) {
      auto& m = motion[j];
      m.wander_ax = wander_amp * rng.uniform(0.3, 1.0);
      m.wander_ay = wander_amp * rng.uniform(0.3, 1.0);
      m.wander_fx = rng.uniform(0.1, 0.45);
      m.wander_fy = rng.uniform(0.1, 0.45);
      m.wander_px = rng.uniform(0.0, 6.283185307179586);
      m.wander_py = rng.uniform(0.0, 6.283185307179586);
    }
    for (int j : coupled) {
      const double ang = rng.uniform(0.0, 6.283185307179586);
      const double amp = cfg.ictal_amplitude_px * rng.uniform(0.85, 1.0);
      motion[j].osc_ax = amp * std::cos(ang);
      motion[j].osc_ay = amp * std::sin(ang);
    }
    const double osc_phase = rng.uniform(0.0, 6.283185307179586);

    const auto n_frames = static_cast<std::int64_t>(std::llround(cfg.duration_s * cfg.fps));
    const double lo_x = margin - cfg.interictal_jitter_px;
    const double hi_x = cfg.frame_width - 1 - lo_x;
    const double lo_y = lo_x;
    const double hi_y = cfg.frame_height - 1 - lo_y;
    vid.keypoints.reserve(static_cast<std::size_t>(n_frames));
    for (std::int64_t f = 0; f < n_frames; ++f) {
      const double t = static_cast<double>(f) / cfg.fps;
      const double bx = cx + sway_ax * std::sin(6.283185307179586 * sway_fx * t + sway_px);
      const double by = cy + sway_ay * std::sin(6.283185307179586 * sway_fy * t + sway_py);
      // smooth half-second envelope around the rhythmic phase
      double env = 0.0;
      if (t >= clinical && t <= vid.scene.osc_end_s) {
        const double rise = std::min(1.0, (t - clinical) / 0.5);
        const double fall = std::min(1.0, (vid.scene.osc_end_s - t) / 0.5);
        env = std::min(rise, fall);
      }
      const double osc = std::sin(6.283185307179586 * vid.scene.osc_freq_hz * t + osc_phase);

      KeypointFrame kf;
      kf.frame_index = f;
      for (int j = 0; j < kNumJoints; ++j) {
        const auto& m = motion[j];
        double x = bx + kSkeletonUnits[j][0] * scale;
        double y = by + kSkeletonUnits[j][1] * scale;
        x += m.wander_ax * std::sin(6.283185307179586 * m.wander_fx * t + m.wander_px);
        y += m.wander_ay * std::sin(6.283185307179586 * m.wander_fy * t + m.wander_py);
        x += rng.normal(0.0, cfg.interictal_jitter_px);
        y += rng.normal(0.0, cfg.interictal_jitter_px);
        x += env * m.osc_ax * osc;
        y += env * m.osc_ay * osc;
        if (cfg.in_bounds) {
          x = std::clamp(x, lo_x, hi_x);
          y = std::clamp(y, lo_y, hi_y);
        } else {
          x = std::clamp(x, 0.0, cfg.frame_width - 1.0);
          y = std::clamp(y, 0.0, cfg.frame_height - 1.0);
        }
        kf.joints[j] = Joint{j, x, y, 1.0, true};
      }
      vid.keypoints.push_back(std::move(kf));
    }
    videos.push_back(std::move(vid));
  }
  return videos;
}

// What the generator meant each window to be, derived from its own motion
// state rather than the labeling rules: ictal when rhythmic motion covers
// the whole window, interictal when the window is entirely quiescent and
// pre-onset.
inline SegmentLabel intended_label(const SceneParams& sc, double start_s,
                                   double length_s = 5.0) {
  const double end = start_s + length_s;
  if (start_s >= sc.clinical_onset_s && end <= sc.osc_end_s)
    return SegmentLabel::kIctal;
  if (end <= sc.eeg_onset_s) return SegmentLabel::kInterictal;
  return SegmentLabel::kExcluded;
}

inline nlohmann::json scene_to_json(const SceneParams& sc) {
  return {{"video_id", sc.video_id},
          {"subject_id", sc.subject_id},
          {"height", sc.height},
          {"width", sc.width},
          {"fps", sc.fps},
          {"eeg_onset_s", sc.eeg_onset_s},
          {"clinical_onset_s", sc.clinical_onset_s},
          {"duration_s", sc.duration_s},
          {"osc_end_s", sc.osc_end_s},
          {"osc_freq_hz", sc.osc_freq_hz},
          {"coupled_joints", sc.coupled_joints},
          {"texture_seed", sc.texture_seed},
          {"texture_cell_a", sc.texture_cell_a},
          {"texture_cell_b", sc.texture_cell_b},
          {"bg_base", sc.bg_base},
          {"bg_amp", sc.bg_amp},
          {"bg_drift_vx", sc.bg_drift_vx},
          {"bg_drift_vy", sc.bg_drift_vy},
          {"pixel_noise", sc.pixel_noise},
          {"body_color", sc.body_color},
          {"blob_color", sc.blob_color},
          {"blob_radius", sc.blob_radius},
          {"limb_half_width", sc.limb_half_width}};
}

inline SceneParams scene_from_json(const nlohmann::json& j) {
  SceneParams sc;
  try {
    sc.video_id = j.at("video_id").get<std::string>();
    sc.subject_id = j.at("subject_id").get<std::string>();
    sc.height = j.at("height").get<int>();
    sc.width = j.at("width").get<int>();
    sc.fps = j.at("fps").get<double>();
    sc.eeg_onset_s = j.at("eeg_onset_s").get<double>();
    sc.clinical_onset_s = j.at("clinical_onset_s").get<double>();
    sc.duration_s = j.at("duration_s").get<double>();
    sc.osc_end_s = j.at("osc_end_s").get<double>();
    sc.osc_freq_hz = j.at("osc_freq_hz").get<double>();
    sc.coupled_joints = j.at("coupled_joints").get<std::vector<int>>();
    sc.texture_seed = j.at("texture_seed").get<std::uint64_t>();
    sc.texture_cell_a = j.at("texture_cell_a").get<double>();
    sc.texture_cell_b = j.at("texture_cell_b").get<double>();
    sc.bg_base = j.at("bg_base").get<std::array<double, 3>>();
    sc.bg_amp = j.at("bg_amp").get<std::array<double, 3>>();
    sc.bg_drift_vx = j.at("bg_drift_vx").get<double>();
    sc.bg_drift_vy = j.at("bg_drift_vy").get<double>();
    sc.pixel_noise = j.at("pixel_noise").get<double>();
    sc.body_color = j.at("body_color").get<std::array<double, 3>>();
    sc.blob_color = j.at("blob_color").get<std::array<double, 3>>();
    sc.blob_radius = j.at("blob_radius").get<double>();
    sc.limb_half_width = j.at("limb_half_width").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed scene file: ") + e.what());
  }
  return sc;
}

}  // namespace jattn
