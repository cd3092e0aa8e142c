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

// The dialogue state tracker built on one shared Transformer.
//
// A turn is tracked in two phases that use the same weights:
//  1. encode: bidirectional pass over [CLS] D_prev [SEP] D_curr [SEP] slots;
//     an MLP over each [SLOT] state classifies the slot's operation.
//  2. for every UPDATE slot, decode: a left-to-right pass from [BOS] whose
//     layer l also attends to the encoder's level-(l-1) states at the
//     positions the ReuseSpec selects; values are read off greedily through
//     the (tied) token embedding matrix.
//
// Training sums the operation loss and the teacher-forced value loss so
// both objectives update the same parameters.

#ifndef FLATDST_DST_MODEL_HPP_
#define FLATDST_DST_MODEL_HPP_

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <random>
#include <set>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "flatdst/autograd.hpp"
#include "flatdst/dataset.hpp"
#include "flatdst/error.hpp"
#include "flatdst/input.hpp"
#include "flatdst/ops.hpp"
#include "flatdst/reuse.hpp"
#include "flatdst/state.hpp"
#include "flatdst/transformer.hpp"
#include "flatdst/vocab.hpp"

namespace flatdst {

template <Real T>
struct EncoderOutput {
  LayerStates<T> layer_states;  // X^0 .. X^L
  Var<T> slot_logits;           // J x 4
};

struct GeneratedValue {
  std::vector<int> tokens;  // without [BOS] / [EOS]
  bool truncated = false;   // max_len reached without [EOS]
};

// One supervised turn, with the gold previous state as input.
struct TrainingExample {
  std::string dialogue_id;
  int turn_index = 0;
  EncodedInput input;
  std::vector<StateOperation> ops;
  std::map<std::size_t, std::vector<int>> targets;  // UPDATE slot -> value tokens
};

template <Real T>
struct JointLoss {
  Var<T> total;
  Var<T> sop;
  Var<T> vg;  // undefined when the batch has no gold UPDATE slot
  std::size_t update_slots = 0;
};

struct TurnPrediction {
  std::vector<StateOperation> ops;
  UpdateValues values;
  DialogueState state;
  std::size_t decoder_invocations = 0;
  bool truncated_value = false;
};

// Argmax per row of a J x 4 logit matrix; ties resolve to the lowest enum.
template <Real T>
std::vector<StateOperation> predict_operations(const EncoderOutput<T>& output) {
  const Tensor<T>& logits = output.slot_logits.value();
  std::vector<StateOperation> ops;
  ops.reserve(logits.rows());
  for (std::size_t j = 0; j < logits.rows(); ++j) {
    const auto row = logits.row(j);
    std::size_t best = 0;
    for (std::size_t c = 1; c < row.size(); ++c) {
      if (row[c] > row[best]) best = c;
    }
    ops.push_back(kAllOperations[best]);
  }
  return ops;
}

// Names of the parameters a recorded value depends on.
template <Real T>
std::set<std::string> reachable_parameter_names(const Var<T>& out,
                                                const ParameterSet<T>& params) {
  std::unordered_set<const detail::Node<T>*> seen;
  std::vector<const detail::Node<T>*> stack{out.node()};
  while (!stack.empty()) {
    const auto* n = stack.back();
    stack.pop_back();
    if (!seen.insert(n).second) continue;
    for (const auto& p : n->parents) stack.push_back(p.get());
  }
  std::set<std::string> names;
  for (const auto& p : params) {
    if (seen.count(p.var.node())) names.insert(p.name);
  }
  return names;
}

template <Real T>
class DstModel {
 public:
  static constexpr std::size_t kDefaultMaxValueLen = 8;

  DstModel(ModelConfig config, Vocab vocab, SchemaPtr schema, ReuseSpec reuse,
           std::uint64_t seed, std::size_t max_value_len = kDefaultMaxValueLen)
      : vocab_(std::move(vocab)),
        schema_(std::move(schema)),
        reuse_(reuse),
        max_value_len_(max_value_len),
        params_(std::make_unique<ParameterSet<T>>()) {
    config.vocab_size = static_cast<int>(vocab_.size());
    if (!schema_ || schema_->empty()) throw ContractError("model needs a non-empty schema");
    if (reuse_.empty()) throw InvalidSpecError("empty reuse spec");
    if (max_value_len_ < 1) throw ContractError("max_value_len must be >= 1");
    transformer_ = std::make_unique<Transformer<T>>(config, *params_, seed);
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    const auto d = static_cast<std::size_t>(config.hidden_dim);
    auto normal = [&](std::size_t r, std::size_t c) {
      std::normal_distribution<double> dist(0.0, config.init_std);
      Tensor<T> t = Tensor<T>::matrix(r, c);
      for (auto& x : t.data()) x = static_cast<T>(dist(rng));
      return t;
    };
    sop_hidden_w_ = params_->add("sop.hidden.weight", normal(d, d));
    sop_hidden_b_ = params_->add("sop.hidden.bias", Tensor<T>(Shape{d}));
    sop_out_w_ = params_->add("sop.out.weight", normal(d, kNumOperations));
    sop_out_b_ = params_->add("sop.out.bias", Tensor<T>(Shape{kNumOperations}));
    vg_out_b_ = params_->add("vg.out_bias", Tensor<T>(Shape{vocab_.size()}));
  }

  DstModel(DstModel&&) noexcept = default;
  DstModel& operator=(DstModel&&) noexcept = default;

  const ModelConfig& config() const { return transformer_->config(); }
  const Vocab& vocab() const { return vocab_; }
  const SchemaPtr& schema() const { return schema_; }
  const ReuseSpec& reuse_spec() const { return reuse_; }
  std::size_t max_value_len() const { return max_value_len_; }
  ParameterSet<T>& params() { return *params_; }
  const ParameterSet<T>& params() const { return *params_; }
  const Transformer<T>& transformer() const { return *transformer_; }
  std::size_t max_input_len() const { return static_cast<std::size_t>(config().max_positions); }

  // Number of generate_value calls since construction.
  std::size_t generate_calls() const { return generate_calls_->load(); }

  static bool is_sop_head(const std::string& name) { return name.rfind("sop.", 0) == 0; }

  EncodedInput assemble(const DialogueTurn& prev_turn, const DialogueTurn& curr_turn,
                        const DialogueState& prev_state) const {
    return assemble_encoder_input(prev_turn, curr_turn, prev_state, vocab_, max_input_len());
  }

  EncoderOutput<T> encode(const EncodedInput& input) const {
    if (input.num_slots() != schema_->size()) {
      throw ContractError("encode: input has " + std::to_string(input.num_slots()) +
                          " slots, schema has " + std::to_string(schema_->size()));
    }
    EncoderOutput<T> out;
    Var<T> x0 = transformer_->embed_input(input.token_ids, input.position_ids, input.type_ids);
    out.layer_states = transformer_->encode_stack(x0);
    Var<T> markers = gather_rows(out.layer_states.back(),
                                 std::span<const std::size_t>(input.slot_marker));
    Var<T> hidden = tanh(linear(markers, sop_hidden_w_, sop_hidden_b_));
    out.slot_logits = linear(hidden, sop_out_w_, sop_out_b_);
    return out;
  }

  // Encoder levels 0 .. L-1 restricted to the positions `spec` picks for
  // slot j; rows are the stored encoder values.
  std::vector<Var<T>> select_reuse_states(const EncoderOutput<T>& output,
                                          const EncodedInput& input, const ReuseSpec& spec,
                                          std::size_t j) const {
    const std::vector<std::size_t> rows = spec.resolve(input, j);
    std::vector<Var<T>> reused;
    const auto levels = static_cast<std::size_t>(config().num_layers);
    reused.reserve(levels);
    for (std::size_t l = 0; l < levels; ++l) {
      reused.push_back(gather_rows(output.layer_states.at(l), std::span<const std::size_t>(rows)));
    }
    return reused;
  }

  std::vector<Var<T>> select_reuse_states(const EncoderOutput<T>& output,
                                          const EncodedInput& input, std::size_t j) const {
    return select_reuse_states(output, input, reuse_, j);
  }

  // Decoder pass over `dec_tokens` (starting with [BOS]); returns Y^0 .. Y^L.
  LayerStates<T> decode(const std::vector<Var<T>>& reused, std::span<const int> dec_tokens) const {
    if (dec_tokens.size() > max_input_len()) {
      throw ContractError("decoder input of " + std::to_string(dec_tokens.size()) +
                          " tokens exceeds max_positions");
    }
    std::vector<int> positions(dec_tokens.size());
    for (std::size_t i = 0; i < positions.size(); ++i) positions[i] = static_cast<int>(i);
    const std::vector<int> types(dec_tokens.size(), 1);
    Var<T> y0 = transformer_->embed_input(dec_tokens, positions, types);
    return transformer_->decode_stack(y0, reused);
  }

  // Vocabulary logits through the transposed token embedding plus bias.
  Var<T> vocab_logits(const Var<T>& hidden) const {
    return add_row(matmul_nt(hidden, transformer_->token_embedding()), vg_out_b_);
  }

  GeneratedValue generate_value(const std::vector<Var<T>>& reused, std::size_t max_len) const {
    if (max_len < 1) throw ContractError("generate_value needs max_len >= 1");
    generate_calls_->fetch_add(1);
    NoGradGuard no_grad;
    GeneratedValue out;
    std::vector<int> seq{tokens::kBos};
    for (;;) {
      const LayerStates<T> states = decode(reused, seq);
      const std::size_t last = seq.size() - 1;
      Var<T> logits = vocab_logits(gather_rows(states.back(), std::span<const std::size_t>(&last, 1)));
      const auto row = logits.value().row(0);
      std::size_t best = 0;
      for (std::size_t c = 1; c < row.size(); ++c) {
        if (row[c] > row[best]) best = c;
      }
      const int next = static_cast<int>(best);
      if (next == tokens::kEos) return out;
      out.tokens.push_back(next);
      if (out.tokens.size() >= max_len) {
        out.truncated = true;
        return out;
      }
      seq.push_back(next);
    }
  }

  Var<T> sop_loss(const Var<T>& slot_logits, std::span<const StateOperation> gold) const {
    if (gold.size() != slot_logits.rows()) {
      throw ContractError("sop_loss: " + std::to_string(gold.size()) + " labels for " +
                          std::to_string(slot_logits.rows()) + " slots");
    }
    std::vector<int> targets;
    targets.reserve(gold.size());
    for (auto op : gold) targets.push_back(op_index(op));
    return cross_entropy(slot_logits, std::span<const int>(targets));
  }

  // Teacher-forced next-token loss over [BOS] value -> value [EOS].
  Var<T> vg_loss(const std::vector<Var<T>>& reused, std::span<const int> gold_value) const {
    if (gold_value.empty()) throw ContractError("vg_loss needs a non-empty gold value");
    std::vector<int> input{tokens::kBos};
    input.insert(input.end(), gold_value.begin(), gold_value.end());
    std::vector<int> targets(gold_value.begin(), gold_value.end());
    targets.push_back(tokens::kEos);
    const LayerStates<T> states = decode(reused, input);
    return cross_entropy(vocab_logits(states.back()), std::span<const int>(targets));
  }

  // Mean operation loss over examples plus mean value loss over all gold
  // UPDATE slots of the batch.
  JointLoss<T> joint_loss(std::span<const TrainingExample> batch) const {
    if (batch.empty()) throw ContractError("joint_loss of an empty batch");
    std::vector<Var<T>> sops;
    std::vector<Var<T>> vgs;
    for (const auto& ex : batch) {
      EncoderOutput<T> out = encode(ex.input);
      sops.push_back(sop_loss(out.slot_logits, ex.ops));
      for (const auto& [j, value] : ex.targets) {
        vgs.push_back(vg_loss(select_reuse_states(out, ex.input, j), value));
      }
    }
    JointLoss<T> loss;
    loss.sop = scale(add_n(sops), T{1} / static_cast<T>(sops.size()));
    loss.update_slots = vgs.size();
    if (vgs.empty()) {
      loss.total = loss.sop;
    } else {
      loss.vg = scale(add_n(vgs), T{1} / static_cast<T>(vgs.size()));
      loss.total = add(loss.sop, loss.vg);
    }
    return loss;
  }

  // Predicts the state after `curr_turn`. Only UPDATE slots invoke the
  // decoder.
  TurnPrediction track_turn(const DialogueTurn& prev_turn, const DialogueTurn& curr_turn,
                            const DialogueState& prev_state) const {
    NoGradGuard no_grad;
    const EncodedInput input = assemble(prev_turn, curr_turn, prev_state);
    const EncoderOutput<T> out = encode(input);
    TurnPrediction pred;
    pred.ops = predict_operations(out);
    for (std::size_t j = 0; j < pred.ops.size(); ++j) {
      if (pred.ops[j] != StateOperation::kUpdate) continue;
      const GeneratedValue v = generate_value(select_reuse_states(out, input, j), max_value_len_);
      ++pred.decoder_invocations;
      pred.truncated_value = pred.truncated_value || v.truncated;
      pred.values.emplace(j, detokenize(v.tokens, vocab_));
    }
    pred.state = apply_operations(prev_state, pred.ops, pred.values);
    return pred;
  }

  // Examples for teacher-forced training: gold previous turn and state.
  std::vector<TrainingExample> make_examples(const std::vector<DialogueRecord>& records) const {
    std::vector<TrainingExample> out;
    for (const auto& r : records) {
      DialogueTurn prev_turn;
      DialogueState prev_state(schema_);
      for (const auto& t : r.turns) {
        TrainingExample ex;
        ex.dialogue_id = r.dialogue_id;
        ex.turn_index = t.turn.turn_index;
        ex.input = assemble(prev_turn, t.turn, prev_state);
        GoldOperations gold = derive_gold_operations(prev_state, t.gold);
        ex.ops = std::move(gold.ops);
        for (const auto& [j, value] : gold.update_targets) {
          ex.targets.emplace(j, tokenize(value, vocab_));
        }
        out.push_back(std::move(ex));
        prev_turn = t.turn;
        prev_state = t.gold;
      }
    }
    return out;
  }

 private:
  Vocab vocab_;
  SchemaPtr schema_;
  ReuseSpec reuse_;
  std::size_t max_value_len_;
  std::unique_ptr<ParameterSet<T>> params_;
  std::unique_ptr<Transformer<T>> transformer_;
  Var<T> sop_hidden_w_, sop_hidden_b_, sop_out_w_, sop_out_b_, vg_out_b_;
  std::unique_ptr<std::atomic<std::size_t>> generate_calls_ =
      std::make_unique<std::atomic<std::size_t>>(0);
};

}  // namespace flatdst

#endif  // FLATDST_DST_MODEL_HPP_
