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

#ifndef FLATDST_METRICS_HPP_
#define FLATDST_METRICS_HPP_

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "flatdst/error.hpp"
#include "flatdst/state.hpp"

namespace flatdst {

struct EvalReport {
  std::string mode;
  std::size_t turns = 0;
  double joint_goal_accuracy = 0;
  std::map<std::string, double> per_domain_joint_accuracy;
  double slot_accuracy = 0;
  double op_accuracy = 0;
  double mean_latency_ms = 0;
  std::map<std::size_t, std::size_t> decoder_invocations_histogram;
  std::size_t decoder_invocations = 0;
  std::size_t workers = 1;
  bool latency_sharded = false;

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["mode"] = mode;
    j["turns"] = turns;
    j["joint_goal_accuracy"] = joint_goal_accuracy;
    nlohmann::ordered_json dom = nlohmann::ordered_json::object();
    for (const auto& [d, a] : per_domain_joint_accuracy) dom[d] = a;
    j["per_domain_joint_accuracy"] = dom;
    j["slot_accuracy"] = slot_accuracy;
    j["op_accuracy"] = op_accuracy;
    j["mean_latency_per_turn_ms"] = mean_latency_ms;
    nlohmann::ordered_json hist = nlohmann::ordered_json::object();
    for (const auto& [k, n] : decoder_invocations_histogram) hist[std::to_string(k)] = n;
    j["decoder_invocations_histogram"] = hist;
    j["decoder_invocations"] = decoder_invocations;
    j["workers"] = workers;
    j["latency_sharded"] = latency_sharded;
    return j;
  }
};

// Accumulates per-turn outcomes; mergeable across shards.
class Scorer {
 public:
  explicit Scorer(SchemaPtr schema) : schema_(std::move(schema)) {
    if (!schema_) throw ContractError("scorer needs a schema");
    for (const auto& d : schema_->domains()) domain_correct_[d] = 0;
  }

  void add_turn(const DialogueState& predicted, const DialogueState& gold,
                std::span<const StateOperation> predicted_ops,
                std::span<const StateOperation> gold_ops, std::size_t decoder_invocations,
                double latency_ms) {
    const std::size_t J = schema_->size();
    if (predicted.size() != J || gold.size() != J) {
      throw ContractError("scorer: state does not match the schema");
    }
    ++turns_;
    bool all = true;
    std::map<std::string, bool> dom_ok;
    for (const auto& d : schema_->domains()) dom_ok[d] = true;
    for (std::size_t j = 0; j < J; ++j) {
      const bool ok = predicted[j] == gold[j];
      slot_correct_ += ok;
      all = all && ok;
      if (!ok) dom_ok[(*schema_)[j].domain] = false;
    }
    joint_correct_ += all;
    for (const auto& [d, ok] : dom_ok) domain_correct_[d] += ok;
    if (!predicted_ops.empty() && predicted_ops.size() == gold_ops.size()) {
      for (std::size_t j = 0; j < predicted_ops.size(); ++j) {
        op_correct_ += predicted_ops[j] == gold_ops[j];
      }
      op_total_ += predicted_ops.size();
    }
    ++histogram_[decoder_invocations];
    invocations_ += decoder_invocations;
    latency_ms_ += latency_ms;
  }

  void merge(const Scorer& other) {
    turns_ += other.turns_;
    joint_correct_ += other.joint_correct_;
    slot_correct_ += other.slot_correct_;
    op_correct_ += other.op_correct_;
    op_total_ += other.op_total_;
    invocations_ += other.invocations_;
    latency_ms_ += other.latency_ms_;
    for (const auto& [d, n] : other.domain_correct_) domain_correct_[d] += n;
    for (const auto& [k, n] : other.histogram_) histogram_[k] += n;
  }

  EvalReport report(const std::string& mode) const {
    EvalReport r;
    r.mode = mode;
    r.turns = turns_;
    const double t = turns_ ? static_cast<double>(turns_) : 1.0;
    r.joint_goal_accuracy = static_cast<double>(joint_correct_) / t;
    for (const auto& [d, n] : domain_correct_) {
      r.per_domain_joint_accuracy[d] = static_cast<double>(n) / t;
    }
    const double slots = static_cast<double>(turns_ * schema_->size());
    r.slot_accuracy = turns_ ? static_cast<double>(slot_correct_) / slots : 0.0;
    r.op_accuracy = op_total_ ? static_cast<double>(op_correct_) / static_cast<double>(op_total_) : 0.0;
    r.mean_latency_ms = latency_ms_ / t;
    r.decoder_invocations_histogram = histogram_;
    r.decoder_invocations = invocations_;
    return r;
  }

 private:
  SchemaPtr schema_;
  std::size_t turns_ = 0;
  std::size_t joint_correct_ = 0;
  std::size_t slot_correct_ = 0;
  std::size_t op_correct_ = 0;
  std::size_t op_total_ = 0;
  std::size_t invocations_ = 0;
  double latency_ms_ = 0;
  std::map<std::string, std::size_t> domain_correct_;
  std::map<std::size_t, std::size_t> histogram_;
};

}  // namespace flatdst

#endif  // FLATDST_METRICS_HPP_
