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

// Encoder input serialization:
//
//   [CLS] D_prev [SEP] D_curr [SEP] ([SLOT] domain - slot - value)*J
//
// where each dialogue turn is "system ; user" (just "user" when the system
// side is empty) and NULL / DONTCARE values serialize as the reserved
// "null" / "dontcare" tokens.

#ifndef FLATDST_INPUT_HPP_
#define FLATDST_INPUT_HPP_

#include <cstddef>
#include <string>
#include <vector>

#include "flatdst/error.hpp"
#include "flatdst/state.hpp"
#include "flatdst/vocab.hpp"

namespace flatdst {

// Half-open position range.
struct Span {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - begin; }
  bool empty() const { return end == begin; }
  friend bool operator==(const Span&, const Span&) = default;
};

struct EncodedInput {
  std::vector<int> token_ids;
  std::vector<int> position_ids;
  std::vector<int> type_ids;

  Span cls;
  Span prev_turn;
  Span curr_turn;
  std::vector<std::size_t> slot_marker;  // one [SLOT] position per schema pair
  std::vector<Span> tuple_region;        // domain - slot - value, after the marker
  std::vector<Span> tuple_ds;            // domain - slot prefix of tuple_region

  std::size_t truncated_tokens = 0;
  std::vector<std::string> warnings;

  std::size_t size() const { return token_ids.size(); }
  std::size_t num_slots() const { return slot_marker.size(); }
};

inline std::vector<int> turn_token_ids(const DialogueTurn& turn, const Vocab& vocab) {
  std::vector<int> ids = tokenize(turn.system, vocab);
  std::vector<int> user = tokenize(turn.user, vocab);
  if (!ids.empty() && !user.empty()) ids.push_back(vocab.id(";"));
  ids.insert(ids.end(), user.begin(), user.end());
  return ids;
}

inline std::vector<int> value_token_ids(const SlotValue& v, const Vocab& vocab) {
  if (v.is_null()) return {tokens::kNull};
  if (v.is_dontcare()) return {tokens::kDontCare};
  return tokenize(v.text_value(), vocab);
}

// Builds the encoder input for predicting the state after `curr_turn`.
// When longer than `max_len`, dialogue tokens are dropped from the left
// (previous turn first); slot tuples are never truncated.
inline EncodedInput assemble_encoder_input(const DialogueTurn& prev_turn,
                                           const DialogueTurn& curr_turn,
                                           const DialogueState& prev_state, const Vocab& vocab,
                                           std::size_t max_len) {
  if (!prev_state.schema() || prev_state.size() != prev_state.schema()->size()) {
    throw ContractError("assemble_encoder_input: previous state does not cover its schema");
  }
  const Schema& schema = *prev_state.schema();
  std::vector<int> prev = turn_token_ids(prev_turn, vocab);
  std::vector<int> curr = turn_token_ids(curr_turn, vocab);

  std::vector<std::vector<int>> tuples;
  std::vector<std::size_t> ds_len;
  std::size_t slots_len = 0;
  for (std::size_t j = 0; j < schema.size(); ++j) {
    std::vector<int> t = tokenize(schema[j].domain, vocab);
    t.push_back(tokens::kDash);
    std::vector<int> s = tokenize(schema[j].slot, vocab);
    t.insert(t.end(), s.begin(), s.end());
    ds_len.push_back(t.size());
    t.push_back(tokens::kDash);
    std::vector<int> v = value_token_ids(prev_state[j], vocab);
    t.insert(t.end(), v.begin(), v.end());
    slots_len += 1 + t.size();
    tuples.push_back(std::move(t));
  }

  EncodedInput in;
  const std::size_t fixed = 3 + slots_len;  // [CLS] [SEP] [SEP]
  if (fixed > max_len) {
    throw ContractError("assemble_encoder_input: slot tuples need " + std::to_string(fixed) +
                        " positions but the limit is " + std::to_string(max_len));
  }
  std::size_t total = fixed + prev.size() + curr.size();
  if (total > max_len) {
    std::size_t overflow = total - max_len;
    in.truncated_tokens = overflow;
    const std::size_t from_prev = std::min(overflow, prev.size());
    prev.erase(prev.begin(), prev.begin() + static_cast<std::ptrdiff_t>(from_prev));
    overflow -= from_prev;
    curr.erase(curr.begin(), curr.begin() + static_cast<std::ptrdiff_t>(overflow));
    in.warnings.push_back("truncated " + std::to_string(in.truncated_tokens) +
                          " dialogue tokens from the left to fit " + std::to_string(max_len) +
                          " positions");
  }

  auto& ids = in.token_ids;
  ids.push_back(tokens::kCls);
  in.cls = {0, 1};
  in.prev_turn.begin = ids.size();
  ids.insert(ids.end(), prev.begin(), prev.end());
  in.prev_turn.end = ids.size();
  ids.push_back(tokens::kSep);
  in.curr_turn.begin = ids.size();
  ids.insert(ids.end(), curr.begin(), curr.end());
  in.curr_turn.end = ids.size();
  ids.push_back(tokens::kSep);
  for (std::size_t j = 0; j < tuples.size(); ++j) {
    in.slot_marker.push_back(ids.size());
    ids.push_back(tokens::kSlot);
    const std::size_t start = ids.size();
    ids.insert(ids.end(), tuples[j].begin(), tuples[j].end());
    in.tuple_region.push_back({start, ids.size()});
    in.tuple_ds.push_back({start, start + ds_len[j]});
  }
  in.position_ids.resize(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) in.position_ids[i] = static_cast<int>(i);
  in.type_ids.assign(ids.size(), 0);
  return in;
}

}  // namespace flatdst

#endif  // FLATDST_INPUT_HPP_
