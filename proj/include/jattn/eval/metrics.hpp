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
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "jattn/core/errors.hpp"
#include "jattn/core/random.hpp"

namespace jattn {

// One scored test segment: post-sigmoid probability plus the true label.
struct ScoredSegment {
  std::string video_id;
  double start_s = 0.0;
  double score = 0.0;  // in [0,1]
  int label = 0;       // 0 interictal, 1 ictal
};

struct MetricsReport {
  double accuracy = 0.0;
  std::optional<double> auroc;      // absent on single-class input
  std::optional<double> auprc;
  std::optional<double> precision;  // absent when nothing is predicted positive
  std::optional<double> recall;     // absent when there are no positives
  std::optional<double> f1;
  double threshold = 0.5;
  std::int64_t tp = 0, fp = 0, tn = 0, fn = 0;
  std::vector<std::string> warnings;
};

// AUROC as the probability that a random positive outranks a random
// negative, ties counted 0.5 (rank / Mann-Whitney form).
inline double auroc_rank(const std::vector<ScoredSegment>& scored) {
  const std::size_t n = scored.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scored[a].score < scored[b].score;
  });
  double rank_sum_pos = 0.0;
  std::int64_t n_pos = 0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && scored[order[j]].score == scored[order[i]].score) ++j;
    // 1-based average rank of the tie group [i, j)
    const double avg_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
    for (std::size_t k = i; k < j; ++k)
      if (scored[order[k]].label == 1) {
        rank_sum_pos += avg_rank;
        ++n_pos;
      }
    i = j;
  }
  const std::int64_t n_neg = static_cast<std::int64_t>(n) - n_pos;
  const double u = rank_sum_pos - 0.5 * static_cast<double>(n_pos) * (n_pos + 1);
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

// Average precision: step-wise integration of the precision-recall curve
// over distinct score thresholds (no interpolation).
inline double auprc_average_precision(const std::vector<ScoredSegment>& scored) {
  std::vector<std::size_t> order(scored.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scored[a].score > scored[b].score;
  });
  std::int64_t total_pos = 0;
  for (const auto& s : scored) total_pos += s.label == 1 ? 1 : 0;
  double ap = 0.0;
  double prev_recall = 0.0;
  std::int64_t tp = 0, fp = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() &&
           scored[order[j]].score == scored[order[i]].score) ++j;
    for (std::size_t k = i; k < j; ++k) {
      if (scored[order[k]].label == 1) ++tp; else ++fp;
    }
    const double recall = static_cast<double>(tp) / static_cast<double>(total_pos);
    const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    ap += (recall - prev_recall) * precision;
    prev_recall = recall;
    i = j;
  }
  return ap;
}

// Accuracy / precision / recall / F1 at the given threshold (score >=
// threshold predicts ictal), plus AUROC and AUPRC. Single-class inputs get
// the ranking metrics reported absent, with a warning.
inline MetricsReport compute_metrics(const std::vector<ScoredSegment>& scored,
                                     double threshold = 0.5) {
  if (scored.empty()) throw DataError("compute_metrics: no scored segments");
  MetricsReport r;
  r.threshold = threshold;
  for (const auto& s : scored) {
    if (s.score < 0.0 || s.score > 1.0)
      throw ValidationError("score out of [0,1]: " + std::to_string(s.score));
    const bool pred = s.score >= threshold;
    if (s.label == 1) {
      pred ? ++r.tp : ++r.fn;
    } else {
      pred ? ++r.fp : ++r.tn;
    }
  }
  const auto n = static_cast<double>(scored.size());
  r.accuracy = static_cast<double>(r.tp + r.tn) / n;
  if (r.tp + r.fp > 0)
    r.precision = static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fp);
  if (r.tp + r.fn > 0)
    r.recall = static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fn);
  if (r.precision && r.recall) {
    const double denom = *r.precision + *r.recall;
    r.f1 = denom > 0.0 ? 2.0 * *r.precision * *r.recall / denom : 0.0;
  } else if (r.tp == 0 && (r.fp + r.fn) > 0) {
    r.f1 = 0.0;
  }

  const bool has_pos = (r.tp + r.fn) > 0;
  const bool has_neg = (r.fp + r.tn) > 0;
  if (has_pos && has_neg) {
    r.auroc = auroc_rank(scored);
    r.auprc = auprc_average_precision(scored);
  } else {
    r.warnings.push_back(
        "single-class input: AUROC/AUPRC undefined and reported absent");
  }
  return r;
}

// Reference rows for naive predictors on a test pool of the given class
// counts. The fair coin draws uniform scores from the seed.
struct BaselineRows {
  MetricsReport all_positive;
  MetricsReport all_negative;
  MetricsReport fair_coin;
};

inline std::vector<ScoredSegment> constant_scored(std::int64_t n_neg, std::int64_t n_pos,
                                                  double score) {
  std::vector<ScoredSegment> v;
  v.reserve(static_cast<std::size_t>(n_neg + n_pos));
  for (std::int64_t i = 0; i < n_neg; ++i) v.push_back({"", 0.0, score, 0});
  for (std::int64_t i = 0; i < n_pos; ++i) v.push_back({"", 0.0, score, 1});
  return v;
}

inline BaselineRows baseline_rows(std::int64_t n_neg, std::int64_t n_pos,
                                  std::uint64_t coin_seed = 0xc01fULL) {
  if (n_neg <= 0 || n_pos <= 0)
    throw ConfigError("baseline_rows: both class counts must be positive");
  BaselineRows rows;
  rows.all_positive = compute_metrics(constant_scored(n_neg, n_pos, 1.0));
  rows.all_negative = compute_metrics(constant_scored(n_neg, n_pos, 0.0));
  auto coin = constant_scored(n_neg, n_pos, 0.0);
  Rng rng(mix_seed(coin_seed, 0xc014fULL));
  for (auto& s : coin) s.score = rng.uniform();
  rows.fair_coin = compute_metrics(coin);
  return rows;
}

// Mean and sample standard deviation of each metric across runs.
struct MetricStats {
  double mean = 0.0;
  double stddev = 0.0;
  int n = 0;
};

struct AggregateReport {
  std::map<std::string, MetricStats> stats;
  std::vector<MetricsReport> runs;
};

inline MetricStats mean_std(const std::vector<double>& xs) {
  MetricStats s;
  s.n = static_cast<int>(xs.size());
  if (xs.empty()) return s;
  s.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
  if (xs.size() > 1) {
    double acc = 0.0;
    for (double x : xs) acc += (x - s.mean) * (x - s.mean);
    s.stddev = std::sqrt(acc / (xs.size() - 1));
  }
  return s;
}

inline AggregateReport aggregate_reports(std::vector<MetricsReport> runs) {
  AggregateReport agg;
  auto collect = [&](const char* name, auto getter) {
    std::vector<double> xs;
    for (const auto& r : runs) {
      const auto v = getter(r);
      if (v.has_value()) xs.push_back(*v);
    }
    if (!xs.empty()) agg.stats[name] = mean_std(xs);
  };
  using R = const MetricsReport&;
  collect("accuracy", [](R r) { return std::optional<double>(r.accuracy); });
  collect("auroc", [](R r) { return r.auroc; });
  collect("auprc", [](R r) { return r.auprc; });
  collect("f1", [](R r) { return r.f1; });
  collect("precision", [](R r) { return r.precision; });
  collect("recall", [](R r) { return r.recall; });
  agg.runs = std::move(runs);
  return agg;
}

inline nlohmann::json metrics_to_json(const MetricsReport& r) {
  auto opt = [](const std::optional<double>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
  };
  return {{"accuracy", r.accuracy}, {"auroc", opt(r.auroc)},
          {"auprc", opt(r.auprc)},  {"f1", opt(r.f1)},
          {"precision", opt(r.precision)}, {"recall", opt(r.recall)},
          {"threshold", r.threshold},
          {"counts", {{"tp", r.tp}, {"fp", r.fp}, {"tn", r.tn}, {"fn", r.fn}}},
          {"warnings", r.warnings}};
}

inline nlohmann::json aggregate_to_json(const AggregateReport& agg) {
  nlohmann::json stats = nlohmann::json::object();
  for (const auto& [name, s] : agg.stats)
    stats[name] = {{"mean", s.mean}, {"std", s.stddev}, {"n", s.n}};
  nlohmann::json runs = nlohmann::json::array();
  for (const auto& r : agg.runs) runs.push_back(metrics_to_json(r));
  return {{"stats", stats}, {"runs", runs}};
}

inline void write_scored_segments(const std::filesystem::path& path,
                                  const std::vector<ScoredSegment>& scored) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open for write: " + path.string());
  for (const auto& s : scored) {
    nlohmann::json rec = {{"video_id", s.video_id}, {"start_s", s.start_s},
                          {"score", s.score},       {"label", s.label}};
    out << rec.dump() << "\n";
  }
}

inline std::vector<ScoredSegment> read_scored_segments(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open scored segments: " + path.string());
  std::vector<ScoredSegment> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto rec = nlohmann::json::parse(line);
      ScoredSegment s;
      s.video_id = rec.at("video_id").get<std::string>();
      s.start_s = rec.at("start_s").get<double>();
      s.score = rec.at("score").get<double>();
      s.label = rec.at("label").get<int>();
      out.push_back(std::move(s));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace jattn
