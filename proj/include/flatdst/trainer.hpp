// Copyright 2026 The flatdst Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef FLATDST_TRAINER_HPP_
#define FLATDST_TRAINER_HPP_

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "flatdst/config.hpp"
#include "flatdst/dataset.hpp"
#include "flatdst/dst_model.hpp"
#include "flatdst/error.hpp"
#include "flatdst/metrics.hpp"
#include "flatdst/optimizer.hpp"
#include "flatdst/vocab.hpp"

namespace flatdst {

// Runs the tracker over every dialogue in order. In predicted mode each
// turn's input state is the tracker's own previous prediction; in gold mode
// it is the gold previous state. Dialogues are sharded round-robin over
// `workers` threads and merged in shard order.
template <Real T>
EvalReport evaluate(const DstModel<T>& model, const std::vector<DialogueRecord>& records,
                    EvalMode mode, std::size_t workers = 1) {
  if (workers < 1) workers = 1;
  const SchemaPtr& schema = model.schema();
  for (const auto& r : records) {
    for (const auto& t : r.turns) {
      if (t.gold.schema() != schema && !(t.gold.schema() && *t.gold.schema() == *schema)) {
        throw ContractError("evaluate: dialogue " + r.dialogue_id +
                            " uses a schema different from the model's");
      }
    }
  }
  auto run_shard = [&](std::size_t shard, Scorer& scorer) {
    for (std::size_t i = shard; i < records.size(); i += workers) {
      const auto& r = records[i];
      DialogueTurn prev_turn;
      DialogueState prev_gold(schema);
      DialogueState prev_pred(schema);
      for (const auto& t : r.turns) {
        const DialogueState& input_state =
            mode == EvalMode::kGoldPrevState ? prev_gold : prev_pred;
        const auto start = std::chrono::steady_clock::now();
        TurnPrediction pred = model.track_turn(prev_turn, t.turn, input_state);
        const auto stop = std::chrono::steady_clock::now();
        const double ms = std::chrono::duration<double, std::milli>(stop - start).count();
        const GoldOperations gold_ops = derive_gold_operations(input_state, t.gold);
        scorer.add_turn(pred.state, t.gold, pred.ops, gold_ops.ops, pred.decoder_invocations, ms);
        prev_turn = t.turn;
        prev_gold = t.gold;
        prev_pred = std::move(pred.state);
      }
    }
  };
  Scorer total(schema);
  if (workers == 1) {
    run_shard(0, total);
  } else {
    std::vector<Scorer> scorers(workers, Scorer(schema));
    std::vector<std::thread> threads;
    for (std::size_t w = 0; w < workers; ++w) {
      threads.emplace_back([&, w] { run_shard(w, scorers[w]); });
    }
    for (auto& th : threads) th.join();
    for (const auto& s : scorers) total.merge(s);
  }
  EvalReport report = total.report(to_string(mode));
  report.workers = workers;
  report.latency_sharded = workers > 1;
  return report;
}

struct EpochMetrics {
  int epoch = 0;
  double train_loss = 0;
  double train_jga = 0;
  double dev_jga = 0;
  double wall_time_s = 0;

  // Deterministic fields only; wall time is logged separately.
  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["epoch"] = epoch;
    j["train_loss"] = train_loss;
    j["train_jga"] = train_jga;
    j["dev_jga"] = dev_jga;
    return j;
  }
};

template <Real T>
struct TrainResult {
  DstModel<T> model;  // parameters of the best dev epoch
  std::vector<EpochMetrics> log;
  int best_epoch = 0;
  double best_dev_jga = -1;
  double best_train_jga = -1;
  std::size_t steps = 0;
};

// Vocabulary over every utterance, schema name and gold value of the given
// record sets.
inline Vocab build_vocab(const Schema& schema,
                         std::initializer_list<const std::vector<DialogueRecord>*> sets) {
  std::vector<std::string> texts;
  for (const auto& key : schema.slots()) {
    texts.push_back(key.domain);
    texts.push_back(key.slot);
  }
  for (const auto* set : sets) {
    if (!set) continue;
    for (const auto& r : *set) {
      for (const auto& t : r.turns) {
        texts.push_back(t.turn.system);
        texts.push_back(t.turn.user);
        for (const auto& v : t.gold.values()) {
          if (v.is_text()) texts.push_back(v.text_value());
        }
      }
    }
  }
  return Vocab::build(texts);
}

// Adam with warmup/decay over the joint loss; evaluates after every epoch
// and keeps the parameters of the best dev joint accuracy. Ties go to the
// higher training accuracy, then to the earlier epoch. When `dev` is empty
// the training accuracy selects instead.
template <Real T>
TrainResult<T> train(const TrainConfig& config, const Vocab& vocab, const SchemaPtr& schema,
                     const std::vector<DialogueRecord>& train_set,
                     const std::vector<DialogueRecord>& dev_set,
                     const std::function<void(const EpochMetrics&)>& on_epoch = {}) {
  config.validate();
  DstModel<T> model(config.model, vocab, schema, config.reuse_spec, config.seed,
                    static_cast<std::size_t>(config.max_value_len));
  const std::vector<TrainingExample> examples = model.make_examples(train_set);
  if (examples.empty()) throw ContractError("training set has no turns");

  const auto batch = static_cast<std::size_t>(config.batch_size);
  const std::size_t batches_per_epoch = (examples.size() + batch - 1) / batch;
  const std::size_t total_steps = batches_per_epoch * static_cast<std::size_t>(config.epochs);
  WarmupLinearSchedule schedule(config.learning_rate, config.warmup_proportion, total_steps);
  Adam<T> optimizer(model.params());
  std::mt19937_64 rng(config.seed);

  TrainResult<T> result{std::move(model), {}, 0, -1, -1, 0};
  DstModel<T>& m = result.model;
  std::vector<Tensor<T>> best;
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t step = 0;
  const auto t0 = std::chrono::steady_clock::now();

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0;
    for (std::size_t b = 0; b < batches_per_epoch; ++b) {
      std::vector<TrainingExample> chunk;
      for (std::size_t k = b * batch; k < std::min(examples.size(), (b + 1) * batch); ++k) {
        chunk.push_back(examples[order[k]]);
      }
      optimizer.zero_grad();
      JointLoss<T> loss = m.joint_loss(chunk);
      const double value = static_cast<double>(loss.total.value().item());
      if (!std::isfinite(value)) {
        throw NumericError("non-finite loss at step " + std::to_string(step) + " (epoch " +
                           std::to_string(epoch) + ", batch " + std::to_string(b) + ")");
      }
      backward(loss.total);
      if (config.clip_norm) {
        const double norm = optimizer.clip_grad_norm(*config.clip_norm);
        if (!std::isfinite(norm)) {
          throw NumericError("non-finite gradient at step " + std::to_string(step) +
                             " (epoch " + std::to_string(epoch) + ", batch " +
                             std::to_string(b) + ")");
        }
      }
      optimizer.step(schedule.at(step));
      ++step;
      loss_sum += value;
    }

    EpochMetrics metrics;
    metrics.epoch = epoch;
    metrics.train_loss = loss_sum / static_cast<double>(batches_per_epoch);
    metrics.train_jga = evaluate(m, train_set, config.eval_mode).joint_goal_accuracy;
    metrics.dev_jga = dev_set.empty() ? metrics.train_jga
                                      : evaluate(m, dev_set, config.eval_mode).joint_goal_accuracy;
    metrics.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.log.push_back(metrics);
    if (on_epoch) on_epoch(metrics);

    if (metrics.dev_jga > result.best_dev_jga ||
        (metrics.dev_jga == result.best_dev_jga && metrics.train_jga > result.best_train_jga)) {
      result.best_dev_jga = metrics.dev_jga;
      result.best_train_jga = metrics.train_jga;
      result.best_epoch = epoch;
      best.clear();
      for (const auto& p : m.params()) best.push_back(p.var.value());
    }
    if (config.stop_train_jga && metrics.train_jga >= *config.stop_train_jga) break;
  }
  std::size_t k = 0;
  for (const auto& p : m.params()) Var<T>(p.var).mutable_value() = best[k++];
  result.steps = step;
  return result;
}

struct AblationRow {
  ReuseSpec spec;
  double test_jga = 0;
  double best_dev_jga = 0;
  int best_epoch = 0;
  std::size_t epochs_run = 0;
};

// Trains one model per reuse spec under the same config and seed and scores
// each on `test_set` with predicted previous states.
template <Real T>
std::vector<AblationRow> ablate_reuse(const TrainConfig& base, const std::vector<ReuseSpec>& specs,
                                      const Vocab& vocab, const SchemaPtr& schema,
                                      const std::vector<DialogueRecord>& train_set,
                                      const std::vector<DialogueRecord>& dev_set,
                                      const std::vector<DialogueRecord>& test_set,
                                      const std::function<void(const AblationRow&)>& on_row = {}) {
  if (specs.empty()) throw ContractError("ablate_reuse needs at least one spec");
  std::vector<AblationRow> rows;
  for (const auto& spec : specs) {
    TrainConfig cfg = base;
    cfg.reuse_spec = spec;
    TrainResult<T> trained = train<T>(cfg, vocab, schema, train_set, dev_set);
    AblationRow row;
    row.spec = spec;
    row.best_dev_jga = trained.best_dev_jga;
    row.best_epoch = trained.best_epoch;
    row.epochs_run = trained.log.size();
    row.test_jga =
        evaluate(trained.model, test_set, EvalMode::kPredictedPrevState).joint_goal_accuracy;
    if (on_row) on_row(row);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace flatdst

#endif  // FLATDST_TRAINER_HPP_
