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
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "jattn/core/errors.hpp"

namespace jattn {

// The 14 tracked body joints, in file id order.
inline constexpr int kNumJoints = 14;
inline constexpr const char* kJointNames[kNumJoints] = {
    "head",       "neck",       "r_shoulder", "r_elbow", "r_wrist",
    "l_shoulder", "l_elbow",    "l_wrist",    "r_hip",   "r_knee",
    "r_ankle",    "l_hip",      "l_knee",     "l_ankle"};

struct Joint {
  int joint_id = 0;
  double x = 0.0;       // pixels, original frame
  double y = 0.0;
  double confidence = 0.0;
  bool present = false;  // confidence >= threshold at read time
};

struct KeypointFrame {
  std::int64_t frame_index = 0;
  std::array<Joint, kNumJoints> joints{};  // indexed by joint_id
};

inline constexpr double kDefaultConfidenceThreshold = 0.3;

// Reads a line-delimited keypoint file: one JSON object per line,
// {"frame": int, "joints": [{"id", "x", "y", "c"} x14]}. Joints whose
// confidence falls below the threshold keep their coordinates but come back
// with present=false; dropping them is the cropper's call, not ours.
//
// Frame indices must be 0,1,2,... with no duplicates or gaps.
inline std::vector<KeypointFrame> read_keypoints(
    const std::filesystem::path& path,
    double confidence_threshold = kDefaultConfidenceThreshold) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open keypoint file: " + path.string());

  std::vector<KeypointFrame> frames;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;

    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) +
                       ": malformed keypoint record: " + e.what());
    }

    KeypointFrame kf;
    try {
      kf.frame_index = rec.at("frame").get<std::int64_t>();
      const auto& joints = rec.at("joints");
      if (!joints.is_array() || joints.size() != kNumJoints)
        throw SchemaError(path.string() + ":" + std::to_string(line_no) +
                          ": expected " + std::to_string(kNumJoints) +
                          " joints, got " + std::to_string(joints.size()));
      std::array<bool, kNumJoints> seen{};
      for (const auto& j : joints) {
        const int id = j.at("id").get<int>();
        if (id < 0 || id >= kNumJoints)
          throw SchemaError(path.string() + ":" + std::to_string(line_no) +
                            ": joint id out of range: " + std::to_string(id));
        if (seen[id])
          throw SchemaError(path.string() + ":" + std::to_string(line_no) +
                            ": duplicate joint id: " + std::to_string(id));
        seen[id] = true;
        Joint& out = kf.joints[id];
        out.joint_id = id;
        out.x = j.at("x").get<double>();
        out.y = j.at("y").get<double>();
        out.confidence = j.at("c").get<double>();
        out.present = out.confidence >= confidence_threshold;
      }
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) +
                       ": malformed keypoint record: " + e.what());
    }

    if (kf.frame_index < 0)
      throw SchemaError(path.string() + ":" + std::to_string(line_no) +
                        ": negative frame index");
    const std::int64_t expected = static_cast<std::int64_t>(frames.size());
    if (kf.frame_index != expected) {
      if (kf.frame_index < expected)
        throw OrderingError(path.string() + ":" + std::to_string(line_no) +
                            ": frame index " + std::to_string(kf.frame_index) +
                            " duplicates or decreases after " +
                            std::to_string(expected - 1));
      throw OrderingError(path.string() + ":" + std::to_string(line_no) +
                          ": gap in frame indices; expected " +
                          std::to_string(expected) + ", got " +
                          std::to_string(kf.frame_index));
    }
    frames.push_back(kf);
  }
  return frames;
}

inline void write_keypoints(const std::filesystem::path& path,
                            const std::vector<KeypointFrame>& frames) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open for write: " + path.string());
  for (const auto& kf : frames) {
    nlohmann::json joints = nlohmann::json::array();
    for (const auto& j : kf.joints) {
      joints.push_back({{"id", j.joint_id}, {"x", j.x}, {"y", j.y}, {"c", j.confidence}});
    }
    nlohmann::json rec = {{"frame", kf.frame_index}, {"joints", joints}};
    out << rec.dump() << "\n";
  }
  if (!out) throw DataError("short write: " + path.string());
}

}  // namespace jattn
