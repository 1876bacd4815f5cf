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
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "jattn/eval/metrics.hpp"
#include "jattn/ingest/annotations.hpp"

namespace jattn {

// Per-second prediction series for one video, aligned so that t = 0 is the
// clinical onset. Without an annotation the series stays in absolute time.
struct TimelinePoint {
  double t_rel = 0.0;    // start_s - clinical_onset_s (or start_s unaligned)
  double start_s = 0.0;
  double score = 0.0;
};

struct TimelineReport {
  std::string video_id;
  bool aligned = false;
  double clinical_onset_s = 0.0;
  std::vector<TimelinePoint> points;
  std::vector<std::string> warnings;
};

inline TimelineReport make_timeline(std::vector<ScoredSegment> scored,
                                    const OnsetAnnotation* ann) {
  if (scored.empty()) throw DataError("timeline: no scored segments");
  for (const auto& s : scored)
    if (s.video_id != scored.front().video_id)
      throw DataError("timeline: segments from multiple videos (" +
                      scored.front().video_id + ", " + s.video_id + ")");
  std::sort(scored.begin(), scored.end(),
            [](const ScoredSegment& a, const ScoredSegment& b) {
              return a.start_s < b.start_s;
            });
  TimelineReport rep;
  rep.video_id = scored.front().video_id;
  if (ann) {
    if (ann->video_id != rep.video_id)
      throw DataError("timeline: annotation is for " + ann->video_id +
                      ", segments are from " + rep.video_id);
    rep.aligned = true;
    rep.clinical_onset_s = ann->clinical_onset_s;
  } else {
    rep.warnings.push_back(
        "no annotation: timeline reported in absolute time, not onset-relative");
  }
  rep.points.reserve(scored.size());
  for (const auto& s : scored) {
    TimelinePoint p;
    p.start_s = s.start_s;
    p.score = s.score;
    p.t_rel = rep.aligned ? s.start_s - rep.clinical_onset_s : s.start_s;
    rep.points.push_back(p);
  }
  return rep;
}

inline nlohmann::json timeline_to_json(const TimelineReport& rep) {
  nlohmann::json pts = nlohmann::json::array();
  for (const auto& p : rep.points)
    pts.push_back({{"t_rel", p.t_rel}, {"start_s", p.start_s}, {"score", p.score}});
  return {{"video_id", rep.video_id},
          {"aligned", rep.aligned},
          {"clinical_onset_s", rep.clinical_onset_s},
          {"points", pts},
          {"warnings", rep.warnings}};
}

// Minimal SVG rendering of the score series; the vertical line marks t = 0
// when the report is onset-aligned.
inline void write_timeline_svg(const std::filesystem::path& path,
                               const TimelineReport& rep, int width = 900,
                               int height = 280) {
  if (rep.points.empty()) throw DataError("timeline svg: no points");
  const double t0 = rep.points.front().t_rel;
  const double t1 = rep.points.back().t_rel;
  const double span = std::max(1e-9, t1 - t0);
  const int ml = 50, mr = 15, mt = 15, mb = 35;
  const double pw = width - ml - mr, ph = height - mt - mb;
  auto px = [&](double t) { return ml + (t - t0) / span * pw; };
  auto py = [&](double s) { return mt + (1.0 - s) * ph; };

  std::ofstream out(path);
  if (!out) throw DataError("cannot open for write: " + path.string());
  out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << width
      << "' height='" << height << "'>\n";
  out << "<rect width='100%' height='100%' fill='white'/>\n";
  for (double y : {0.0, 0.5, 1.0})
    out << "<line x1='" << ml << "' y1='" << py(y) << "' x2='" << (width - mr)
        << "' y2='" << py(y) << "' stroke='#ddd'/>\n"
        << "<text x='8' y='" << py(y) + 4 << "' font-size='11'>" << y << "</text>\n";
  if (rep.aligned && t0 <= 0.0 && t1 >= 0.0)
    out << "<line x1='" << px(0.0) << "' y1='" << mt << "' x2='" << px(0.0)
        << "' y2='" << (height - mb) << "' stroke='#c33' stroke-dasharray='4 3'/>\n";
  out << "<polyline fill='none' stroke='#26c' stroke-width='1.5' points='";
  for (const auto& p : rep.points) out << px(p.t_rel) << "," << py(p.score) << " ";
  out << "'/>\n";
  out << "<text x='" << (width / 2 - 60) << "' y='" << (height - 8)
      << "' font-size='12'>"
      << (rep.aligned ? "time relative to clinical onset (s)" : "time (s)")
      << "</text>\n";
  out << "</svg>\n";
}

}  // namespace jattn
