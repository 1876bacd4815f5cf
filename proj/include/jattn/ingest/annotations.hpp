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
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "jattn/core/errors.hpp"

namespace jattn {

// Onset annotation for one video. EEG onset precedes the clinically
// observable motor onset; both are seconds from the start of the video.
struct OnsetAnnotation {
  std::string video_id;
  std::string subject_id;
  double fps_native = 30.0;
  double eeg_onset_s = 0.0;
  double clinical_onset_s = 0.0;
  double duration_s = 0.0;
};

inline void validate(const OnsetAnnotation& a) {
  if (a.video_id.empty()) throw ValidationError("annotation with empty video_id");
  if (a.fps_native <= 0)
    throw ValidationError(a.video_id + ": fps must be positive");
  if (a.eeg_onset_s < 0)
    throw ValidationError(a.video_id + ": eeg_onset_s is negative");
  if (a.clinical_onset_s < a.eeg_onset_s)
    throw ValidationError(a.video_id + ": clinical onset " +
                          std::to_string(a.clinical_onset_s) +
                          " precedes EEG onset " + std::to_string(a.eeg_onset_s));
  if (a.duration_s < a.clinical_onset_s)
    throw ValidationError(a.video_id + ": duration " + std::to_string(a.duration_s) +
                          " shorter than clinical onset " +
                          std::to_string(a.clinical_onset_s));
}

inline OnsetAnnotation annotation_from_json(const nlohmann::json& rec) {
  OnsetAnnotation a;
  try {
    a.video_id = rec.at("video_id").get<std::string>();
    a.subject_id = rec.at("subject_id").get<std::string>();
    a.fps_native = rec.at("fps").get<double>();
    a.eeg_onset_s = rec.at("eeg_onset_s").get<double>();
    a.clinical_onset_s = rec.at("clinical_onset_s").get<double>();
    a.duration_s = rec.at("duration_s").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed annotation record: ") + e.what());
  }
  validate(a);
  return a;
}

inline nlohmann::json annotation_to_json(const OnsetAnnotation& a) {
  return {{"video_id", a.video_id},       {"subject_id", a.subject_id},
          {"fps", a.fps_native},          {"eeg_onset_s", a.eeg_onset_s},
          {"clinical_onset_s", a.clinical_onset_s}, {"duration_s", a.duration_s}};
}

// Annotation file: a JSON array of records, one per video.
inline std::vector<OnsetAnnotation> read_annotations(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open annotation file: " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  if (!doc.is_array()) throw SchemaError(path.string() + ": expected a JSON array");
  std::vector<OnsetAnnotation> out;
  out.reserve(doc.size());
  for (const auto& rec : doc) out.push_back(annotation_from_json(rec));
  return out;
}

inline void write_annotations(const std::filesystem::path& path,
                              const std::vector<OnsetAnnotation>& anns) {
  nlohmann::json doc = nlohmann::json::array();
  for (const auto& a : anns) doc.push_back(annotation_to_json(a));
  std::ofstream out(path);
  if (!out) throw DataError("cannot open for write: " + path.string());
  out << doc.dump(2) << "\n";
}

}  // namespace jattn
