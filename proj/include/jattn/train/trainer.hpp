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
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "jattn/eval/metrics.hpp"
#include "jattn/model/checkpoint.hpp"
#include "jattn/model/encoder.hpp"
#include "jattn/model/fusion_head.hpp"

namespace jattn {

enum class TrainMode { kFrozen, kLora };

inline const char* to_string(TrainMode m) {
  return m == TrainMode::kFrozen ? "frozen" : "lora";
}
inline TrainMode train_mode_from_string(const std::string& s) {
  if (s == "frozen") return TrainMode::kFrozen;
  if (s == "lora") return TrainMode::kLora;
  throw ConfigError("unknown train mode: " + s);
}

struct TrainConfig {
  TrainMode mode = TrainMode::kFrozen;
  int epochs = 40;
  int batch_size = 8;
  double lr_head = 1e-4;
  double lr_lora = 5e-5;
  double weight_decay = 0.01;
  std::uint64_t seed = 1;
  int early_stop_patience = 5;
  bool class_weighting = true;
  LoraConfig lora;

  void validate() const {
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (lr_head <= 0 || lr_lora <= 0) throw ConfigError("learning rates must be positive");
    if (weight_decay < 0) throw ConfigError("weight_decay must be >= 0");
    if (early_stop_patience < 1) throw ConfigError("patience must be >= 1");
  }
};

inline nlohmann::json train_config_to_json(const TrainConfig& c) {
  return {{"mode", to_string(c.mode)},   {"epochs", c.epochs},
          {"batch_size", c.batch_size},  {"lr_head", c.lr_head},
          {"lr_lora", c.lr_lora},        {"weight_decay", c.weight_decay},
          {"seed", c.seed},              {"early_stop_patience", c.early_stop_patience},
          {"class_weighting", c.class_weighting},
          {"lora", {{"rank", c.lora.rank}, {"alpha", c.lora.alpha},
                    {"dropout", c.lora.dropout}, {"target_blocks", c.lora.target_blocks}}}};
}

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  try {
    c.mode = train_mode_from_string(j.at("mode").get<std::string>());
    c.epochs = j.at("epochs").get<int>();
    c.batch_size = j.at("batch_size").get<int>();
    c.lr_head = j.at("lr_head").get<double>();
    c.lr_lora = j.at("lr_lora").get<double>();
    c.weight_decay = j.at("weight_decay").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.early_stop_patience = j.at("early_stop_patience").get<int>();
    c.class_weighting = j.at("class_weighting").get<bool>();
    const auto& l = j.at("lora");
    c.lora.rank = l.at("rank").get<int>();
    c.lora.alpha = l.at("alpha").get<double>();
    c.lora.dropout = l.at("dropout").get<double>();
    c.lora.target_blocks = l.at("target_blocks").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed train config: ") + e.what());
  }
  return c;
}

// One training example. Frozen mode consumes precomputed motion tokens;
// LoRA mode re-encodes the clips every pass, so items must carry them.
struct TrainItem {
  std::string video_id;
  std::string subject_id;
  double start_s = 0.0;
  int label = 0;
  Tensor tokens;    // (J, d), empty in lora mode
  Tensor pos_flat;  // (J, 3T)
  std::shared_ptr<const JointClipSet> clips;  // lora mode only
};

// Decoupled-weight-decay Adam with cosine learning rate decay. LoRA
// parameters run at their own learning rate; decay applies to weight
// matrices only (not biases, gains, or embeddings).
class AdamW {
 public:
  AdamW(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : beta1_(beta1), beta2_(beta2), eps_(eps) {}

  static bool decays(const std::string& name) {
    auto ends_with = [&name](const char* suf) {
      const std::size_t n = std::string(suf).size();
      return name.size() >= n && name.compare(name.size() - n, n, suf) == 0;
    };
    return ends_with(".weight") || ends_with(".lora.A") || ends_with(".lora.B");
  }

  void step(const std::vector<Param*>& params, double lr_head, double lr_lora,
            double weight_decay, double grad_scale) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, t_);
    const double bc2 = 1.0 - std::pow(beta2_, t_);
    for (Param* p : params) {
      Slot& s = slots_[p];
      if (s.m.empty()) {
        s.m = Tensor(p->value.shape);
        s.v = Tensor(p->value.shape);
      }
      const double lr = is_lora_param_name(p->name) ? lr_lora : lr_head;
      const bool wd = decays(p->name);
      for (std::size_t i = 0; i < p->value.data.size(); ++i) {
        const double g = p->grad.data[i] * grad_scale;
        s.m.data[i] = beta1_ * s.m.data[i] + (1.0 - beta1_) * g;
        s.v.data[i] = beta2_ * s.v.data[i] + (1.0 - beta2_) * g * g;
        const double mhat = s.m.data[i] / bc1;
        const double vhat = s.v.data[i] / bc2;
        double& w = p->value.data[i];
        if (wd) w -= lr * weight_decay * w;
        w -= lr * mhat / (std::sqrt(vhat) + eps_);
      }
    }
  }

 private:
  struct Slot {
    Tensor m, v;
  };
  double beta1_, beta2_, eps_;
  std::int64_t t_ = 0;
  std::map<Param*, Slot> slots_;
};

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double val_metric = 0.0;  // AUROC when defined, else -val_loss
  bool val_metric_is_auroc = true;
  double lr_factor = 1.0;
};

struct TrainResult {
  CheckpointData checkpoint;
  std::vector<EpochLog> log;
  int best_epoch = -1;
  double best_val_metric = 0.0;
  int lora_adapters = 0;
};

namespace train_detail {

inline void check_disjoint_subjects(const std::vector<TrainItem>& a,
                                    const std::vector<TrainItem>& b,
                                    const char* what) {
  std::set<std::string> sa;
  for (const auto& i : a) sa.insert(i.subject_id);
  for (const auto& i : b)
    if (sa.count(i.subject_id))
      throw DataError(std::string("subject leakage: ") + i.subject_id +
                      " appears in both train and " + what + " pools");
}

inline Var item_tokens_on_tape(Tape& tape, const TrainItem& item,
                               EncoderAdapter* encoder, TrainMode mode,
                               const FwdCtx& ctx) {
  if (mode == TrainMode::kFrozen) {
    if (item.tokens.empty())
      throw DataError(item.video_id + ": frozen-mode item without precomputed tokens");
    return tape.constant(item.tokens);
  }
  if (!encoder || !item.clips)
    throw DataError(item.video_id + ": lora-mode item without clips or encoder");
  std::vector<Var> rows;
  rows.reserve(static_cast<std::size_t>(item.clips->joints));
  for (const auto& clip : item.clips->clips)
    rows.push_back(encoder->encode(tape, clip, ctx));
  return tape.concat_rows(rows);
}

}  // namespace train_detail

// Segment score under the current weights (inference mode, no dropout).
inline double score_item(const TrainItem& item, EncoderAdapter* encoder,
                         const FusionHead& head, TrainMode mode) {
  Tape tape;
  Var tokens = train_detail::item_tokens_on_tape(tape, item, encoder, mode, FwdCtx{});
  Var logit = head.forward(tape, tokens, tape.constant(item.pos_flat));
  return sigmoid(tape.val(logit).data[0]);
}

inline std::vector<ScoredSegment> score_items(const std::vector<TrainItem>& items,
                                              EncoderAdapter* encoder,
                                              const FusionHead& head, TrainMode mode) {
  std::vector<ScoredSegment> out;
  out.reserve(items.size());
  for (const auto& item : items)
    out.push_back({item.video_id, item.start_s,
                   score_item(item, encoder, head, mode), item.label});
  return out;
}

// Trains the fusion head (plus LoRA adapters in lora mode) against a frozen
// encoder. Early-stops on the validation metric and returns the
// best-validation checkpoint. Deterministic for a fixed config and seed.
//
// In lora mode the adapters must already be injected (the experiment runner
// does this); base encoder weights are frozen either way and verified by
// hash on exit.
inline TrainResult train(std::vector<TrainItem> train_items,
                         std::vector<TrainItem> val_items, EncoderAdapter* encoder,
                         FusionHead& head, const TrainConfig& cfg) {
  cfg.validate();
  if (train_items.empty()) throw DataError("train: empty training pool");
  if (val_items.empty()) throw DataError("train: empty validation pool");
  train_detail::check_disjoint_subjects(train_items, val_items, "validation");

  std::int64_t n_pos = 0, n_neg = 0;
  for (const auto& i : train_items) (i.label == 1 ? n_pos : n_neg) += 1;
  if (n_pos == 0 || n_neg == 0)
    throw DataError("train: training pool must contain both classes (has " +
                    std::to_string(n_neg) + " interictal, " + std::to_string(n_pos) +
                    " ictal)");
  const double pos_weight =
      cfg.class_weighting ? static_cast<double>(n_neg) / static_cast<double>(n_pos) : 1.0;

  if (cfg.mode == TrainMode::kLora && encoder == nullptr)
    throw ConfigError("train: lora mode needs an encoder");

  const std::uint64_t encoder_hash_before =
      encoder ? encoder->base_value_hash() : 0;

  head.set_trainable(true);
  std::vector<Param*> trainables = head.params().trainable();
  if (encoder) {
    for (Param* p : encoder->params().trainable()) trainables.push_back(p);
  }

  AdamW opt;
  Rng shuffle_rng(mix_seed(cfg.seed, 0x0defULL));
  Rng dropout_rng(mix_seed(cfg.seed, 0xd20bULL));

  std::vector<std::size_t> order(train_items.size());
  std::iota(order.begin(), order.end(), 0);

  TrainResult result;
  double best_metric = -std::numeric_limits<double>::infinity();
  std::vector<Tensor> best_values;
  int epochs_since_best = 0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr_factor =
        0.5 * (1.0 + std::cos(3.14159265358979323846 * epoch / cfg.epochs));
    shuffle_rng.shuffle(order);

    double epoch_loss = 0.0;
    std::size_t seen = 0;
    for (std::size_t b = 0; b < order.size(); b += cfg.batch_size) {
      const std::size_t batch_end = std::min(order.size(), b + cfg.batch_size);
      for (Param* p : trainables) p->zero_grad();
      double batch_loss = 0.0;
      for (std::size_t k = b; k < batch_end; ++k) {
        const TrainItem& item = train_items[order[k]];
        Tape tape;
        FwdCtx ctx{true, &dropout_rng};
        Var tokens = train_detail::item_tokens_on_tape(tape, item, encoder,
                                                       cfg.mode, ctx);
        Var logit = head.forward(tape, tokens, tape.constant(item.pos_flat), ctx);
        const double w = item.label == 1 ? pos_weight : 1.0;
        Var loss = tape.bce_with_logit(logit, item.label, w);
        batch_loss += tape.val(loss).data[0];
        tape.backward(loss);
      }
      const double batch_n = static_cast<double>(batch_end - b);
      if (!std::isfinite(batch_loss))
        throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) +
                            ", batch " + std::to_string(b / cfg.batch_size) +
                            "; aborting (check learning rates and inputs)");
      opt.step(trainables, cfg.lr_head * lr_factor, cfg.lr_lora * lr_factor,
               cfg.weight_decay, 1.0 / batch_n);
      epoch_loss += batch_loss;
      seen += batch_end - b;
    }
    epoch_loss /= static_cast<double>(seen);

    // Validation metric: AUROC when both classes are present, otherwise the
    // negative mean validation loss.
    EpochLog log;
    log.epoch = epoch;
    log.train_loss = epoch_loss;
    log.lr_factor = lr_factor;
    const auto val_scored = score_items(val_items, encoder, head, cfg.mode);
    const MetricsReport val_report = compute_metrics(val_scored);
    if (val_report.auroc) {
      log.val_metric = *val_report.auroc;
      log.val_metric_is_auroc = true;
    } else {
      double vloss = 0.0;
      for (const auto& s : val_scored) {
        const double p = std::clamp(s.score, 1e-12, 1.0 - 1e-12);
        vloss += s.label == 1 ? -std::log(p) : -std::log(1.0 - p);
      }
      log.val_metric = -vloss / static_cast<double>(val_scored.size());
      log.val_metric_is_auroc = false;
    }
    result.log.push_back(log);

    if (log.val_metric > best_metric) {
      best_metric = log.val_metric;
      result.best_epoch = epoch;
      best_values.clear();
      best_values.reserve(trainables.size());
      for (Param* p : trainables) best_values.push_back(p->value);
      epochs_since_best = 0;
    } else if (++epochs_since_best >= cfg.early_stop_patience) {
      break;
    }
  }

  for (std::size_t i = 0; i < trainables.size(); ++i)
    trainables[i]->value = best_values[i];
  result.best_val_metric = best_metric;

  if (encoder && encoder->base_value_hash() != encoder_hash_before)
    throw TrainingError("encoder base weights changed during training; the "
                        "frozen-weights contract is broken");

  nlohmann::json meta = {{"train_config", train_config_to_json(cfg)},
                         {"seed", cfg.seed},
                         {"epoch", result.best_epoch},
                         {"val_metric", result.best_val_metric},
                         {"head", head_config_to_json(head.config())}};
  result.checkpoint.meta_json = meta.dump();
  collect_all_params(head.params(), result.checkpoint);
  if (encoder && cfg.mode == TrainMode::kLora)
    collect_params(encoder->params(), result.checkpoint,
                   [](const Param& p) { return is_lora_param_name(p.name); });
  return result;
}

struct ExperimentConfig {
  TrainConfig train;
  FusionHeadConfig head;
  int n_runs = 5;
  int n_val_subjects = 1;
};

struct RunOutcome {
  TrainResult train_result;
  MetricsReport test_report;
  std::vector<ScoredSegment> test_scored;
  std::uint64_t run_seed = 0;
};

struct ExperimentResult {
  AggregateReport report;
  std::vector<RunOutcome> runs;
};

// Repeats train+test n_runs times with per-run seeds base_seed + run index,
// holding out n_val_subjects of the training subjects (subject-wise, seeded
// per run) for model selection. The encoder factory supplies a fresh encoder
// per run in lora mode; frozen runs share one encoder (and may pass null
// when items carry precomputed tokens).
inline ExperimentResult run_experiment(
    const std::vector<TrainItem>& items, const SplitManifest& split,
    const ExperimentConfig& cfg,
    const std::function<EncoderAdapter*(std::uint64_t run_seed)>& encoder_for_run) {
  if (cfg.n_runs < 1) throw ConfigError("run_experiment: n_runs must be >= 1");
  if (cfg.n_val_subjects < 1 ||
      cfg.n_val_subjects >= static_cast<int>(split.train_subjects.size()))
    throw ConfigError("run_experiment: n_val_subjects must leave at least one "
                      "training subject");

  for (const auto& s : split.train_subjects)
    if (split.is_test_subject(s))
      throw DataError("subject leakage: " + s + " in both train and test splits");

  std::vector<TrainItem> test_items;
  for (const auto& item : items)
    if (split.is_test_subject(item.subject_id)) test_items.push_back(item);
  if (test_items.empty()) throw DataError("run_experiment: empty test pool");

  ExperimentResult result;
  std::vector<MetricsReport> reports;
  for (int run = 0; run < cfg.n_runs; ++run) {
    const std::uint64_t run_seed = cfg.train.seed + static_cast<std::uint64_t>(run);

    std::vector<std::string> train_subjects = split.train_subjects;
    Rng val_rng(mix_seed(run_seed, 0x7a11daULL));
    val_rng.shuffle(train_subjects);
    const std::set<std::string> val_subjects(
        train_subjects.begin(), train_subjects.begin() + cfg.n_val_subjects);

    std::vector<TrainItem> train_pool, val_pool;
    for (const auto& item : items) {
      if (split.is_test_subject(item.subject_id)) continue;
      if (!split.is_train_subject(item.subject_id))
        throw DataError("segment subject " + item.subject_id +
                        " is in neither split");
      (val_subjects.count(item.subject_id) ? val_pool : train_pool).push_back(item);
    }

    EncoderAdapter* encoder = encoder_for_run ? encoder_for_run(run_seed) : nullptr;
    TrainConfig run_cfg = cfg.train;
    run_cfg.seed = run_seed;
    FusionHead head(cfg.head, run_seed);

    RunOutcome outcome;
    outcome.run_seed = run_seed;
    outcome.train_result = train(train_pool, val_pool, encoder, head, run_cfg);
    outcome.test_scored = score_items(test_items, encoder, head, run_cfg.mode);
    outcome.test_report = compute_metrics(outcome.test_scored);
    reports.push_back(outcome.test_report);
    result.runs.push_back(std::move(outcome));
  }
  result.report = aggregate_reports(std::move(reports));
  return result;
}

}  // namespace jattn
