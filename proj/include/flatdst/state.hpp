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

// Symbolic dialogue-state bookkeeping: the schema of tracked (domain, slot)
// pairs, per-turn state values, and the four state operations.

#ifndef FLATDST_STATE_HPP_
#define FLATDST_STATE_HPP_

#include <array>
#include <cctype>
#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "flatdst/error.hpp"
#include "flatdst/vocab.hpp"

namespace flatdst {

// Lowercases and collapses runs of whitespace to single spaces.
inline std::string normalize_text(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(std::tolower(c)));
  }
  return out;
}

struct SlotKey {
  std::string domain;
  std::string slot;

  std::string label() const { return domain + "-" + slot; }
  friend bool operator==(const SlotKey&, const SlotKey&) = default;
  friend auto operator<=>(const SlotKey&, const SlotKey&) = default;
};

// Ordered list of the J tracked (domain, slot) pairs. The per-slot value
// lexicon only feeds the synthetic generator; the model never reads it.
class Schema {
 public:
  Schema() = default;

  Schema(std::vector<SlotKey> slots, std::vector<std::vector<std::string>> lexicon = {})
      : slots_(std::move(slots)), lexicon_(std::move(lexicon)) {
    if (lexicon_.empty()) lexicon_.resize(slots_.size());
    if (lexicon_.size() != slots_.size()) {
      throw ContractError("schema lexicon has " + std::to_string(lexicon_.size()) +
                          " entries for " + std::to_string(slots_.size()) + " slots");
    }
    for (std::size_t j = 0; j < slots_.size(); ++j) {
      slots_[j].domain = normalize_text(slots_[j].domain);
      slots_[j].slot = normalize_text(slots_[j].slot);
      if (slots_[j].domain.empty() || slots_[j].slot.empty()) {
        throw ContractError("schema entry " + std::to_string(j) + " has an empty name");
      }
      if (!index_.emplace(slots_[j].label(), j).second) {
        throw ContractError("duplicate schema pair " + slots_[j].label());
      }
      bool known = false;
      for (const auto& d : domains_) known = known || d == slots_[j].domain;
      if (!known) domains_.push_back(slots_[j].domain);
      for (auto& v : lexicon_[j]) v = normalize_text(v);
    }
  }

  std::size_t size() const { return slots_.size(); }
  bool empty() const { return slots_.empty(); }
  const SlotKey& operator[](std::size_t j) const { return slots_.at(j); }
  const std::vector<SlotKey>& slots() const { return slots_; }
  const std::vector<std::string>& domains() const { return domains_; }
  const std::vector<std::string>& lexicon(std::size_t j) const { return lexicon_.at(j); }

  std::optional<std::size_t> find(std::string_view domain, std::string_view slot) const {
    auto it = index_.find(normalize_text(domain) + "-" + normalize_text(slot));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  friend bool operator==(const Schema& a, const Schema& b) { return a.slots_ == b.slots_; }

 private:
  std::vector<SlotKey> slots_;
  std::vector<std::vector<std::string>> lexicon_;
  std::vector<std::string> domains_;
  std::unordered_map<std::string, std::size_t> index_;
};

using SchemaPtr = std::shared_ptr<const Schema>;

class SlotValue {
 public:
  enum class Kind : std::uint8_t { kNull, kDontCare, kText };

  SlotValue() = default;

  static SlotValue null() { return {}; }
  static SlotValue dontcare() { return SlotValue(Kind::kDontCare, {}); }
  // Text in tokenized form ("10:30" -> "10 : 30"); empty text or the
  // reserved words map to NULL/DONTCARE.
  static SlotValue text(std::string_view s) { return parse(s); }

  static SlotValue parse(std::string_view s) {
    std::string norm = normalize_text(s);
    if (norm.empty() || norm == "null" || norm == "none") return null();
    if (norm == "dontcare") return dontcare();
    std::string canonical;
    for (const auto& tok : split_tokens(norm)) {
      if (!canonical.empty()) canonical.push_back(' ');
      canonical += tok;
    }
    return SlotValue(Kind::kText, std::move(canonical));
  }

  Kind kind() const { return kind_; }
  bool is_null() const { return kind_ == Kind::kNull; }
  bool is_dontcare() const { return kind_ == Kind::kDontCare; }
  bool is_text() const { return kind_ == Kind::kText; }
  const std::string& text_value() const { return text_; }

  // Surface form: "null", "dontcare" or the text.
  std::string str() const {
    switch (kind_) {
      case Kind::kNull: return "null";
      case Kind::kDontCare: return "dontcare";
      case Kind::kText: return text_;
    }
    return {};
  }

  friend bool operator==(const SlotValue&, const SlotValue&) = default;

 private:
  SlotValue(Kind k, std::string t) : kind_(k), text_(std::move(t)) {}

  Kind kind_ = Kind::kNull;
  std::string text_;
};

// Full assignment over the schema; untracked pairs hold NULL.
class DialogueState {
 public:
  DialogueState() = default;
  explicit DialogueState(SchemaPtr schema)
      : schema_(std::move(schema)), values_(schema_ ? schema_->size() : 0) {}

  const SchemaPtr& schema() const { return schema_; }
  std::size_t size() const { return values_.size(); }
  const SlotValue& operator[](std::size_t j) const { return values_.at(j); }
  const SlotValue& get(std::size_t j) const { return values_.at(j); }
  void set(std::size_t j, SlotValue v) { values_.at(j) = std::move(v); }
  const std::vector<SlotValue>& values() const { return values_; }

  std::size_t non_null_count() const {
    std::size_t n = 0;
    for (const auto& v : values_) n += !v.is_null();
    return n;
  }

  // "domain|slot|value" entries for every non-NULL slot, in schema order.
  std::vector<std::string> entries() const {
    std::vector<std::string> out;
    for (std::size_t j = 0; j < values_.size(); ++j) {
      if (values_[j].is_null()) continue;
      const auto& key = (*schema_)[j];
      out.push_back(key.domain + "|" + key.slot + "|" + values_[j].str());
    }
    return out;
  }

  friend bool operator==(const DialogueState& a, const DialogueState& b) {
    const bool same_schema =
        a.schema_ == b.schema_ || (a.schema_ && b.schema_ && *a.schema_ == *b.schema_);
    return same_schema && a.values_ == b.values_;
  }

 private:
  SchemaPtr schema_;
  std::vector<SlotValue> values_;
};

struct DialogueTurn {
  std::string system;  // empty on the first turn
  std::string user;
  int turn_index = 1;

  friend bool operator==(const DialogueTurn&, const DialogueTurn&) = default;
};

enum class StateOperation : std::uint8_t { kCarryover = 0, kDelete = 1, kDontCare = 2, kUpdate = 3 };

inline constexpr std::size_t kNumOperations = 4;

inline constexpr std::array<StateOperation, kNumOperations> kAllOperations{
    StateOperation::kCarryover, StateOperation::kDelete, StateOperation::kDontCare,
    StateOperation::kUpdate};

inline std::string_view to_string(StateOperation op) {
  switch (op) {
    case StateOperation::kCarryover: return "CARRYOVER";
    case StateOperation::kDelete: return "DELETE";
    case StateOperation::kDontCare: return "DONTCARE";
    case StateOperation::kUpdate: return "UPDATE";
  }
  return "?";
}

inline int op_index(StateOperation op) { return static_cast<int>(op); }

// UPDATE values keyed by 0-based slot index.
using UpdateValues = std::map<std::size_t, std::string>;

// Applies one operation per slot. `values` must hold a string for exactly
// the UPDATE slots. `prev` is not modified.
inline DialogueState apply_operations(const DialogueState& prev,
                                      std::span<const StateOperation> ops,
                                      const UpdateValues& values) {
  if (ops.size() != prev.size()) {
    throw ContractError("apply_operations: " + std::to_string(ops.size()) +
                        " operations for " + std::to_string(prev.size()) + " slots");
  }
  for (const auto& [j, v] : values) {
    if (j >= ops.size() || ops[j] != StateOperation::kUpdate) {
      throw ContractError("apply_operations: value given for slot " + std::to_string(j) +
                          " which is not an UPDATE");
    }
  }
  DialogueState next = prev;
  for (std::size_t j = 0; j < ops.size(); ++j) {
    switch (ops[j]) {
      case StateOperation::kCarryover: break;
      case StateOperation::kDelete: next.set(j, SlotValue::null()); break;
      case StateOperation::kDontCare: next.set(j, SlotValue::dontcare()); break;
      case StateOperation::kUpdate: {
        auto it = values.find(j);
        if (it == values.end()) {
          throw ContractError("apply_operations: missing value for UPDATE slot " +
                              std::to_string(j));
        }
        next.set(j, SlotValue::text(it->second));
        break;
      }
    }
  }
  return next;
}

struct GoldOperations {
  std::vector<StateOperation> ops;
  UpdateValues update_targets;

  std::size_t update_count() const { return update_targets.size(); }
};

// Labels that turn `prev` into `gold` under apply_operations.
inline GoldOperations derive_gold_operations(const DialogueState& prev,
                                             const DialogueState& gold) {
  if (prev.size() != gold.size()) {
    throw ContractError("derive_gold_operations: states over different schemas");
  }
  GoldOperations out;
  out.ops.reserve(prev.size());
  for (std::size_t j = 0; j < prev.size(); ++j) {
    const SlotValue& p = prev[j];
    const SlotValue& g = gold[j];
    if (p == g) {
      out.ops.push_back(StateOperation::kCarryover);
    } else if (g.is_null()) {
      out.ops.push_back(StateOperation::kDelete);
    } else if (g.is_dontcare()) {
      out.ops.push_back(StateOperation::kDontCare);
    } else {
      out.ops.push_back(StateOperation::kUpdate);
      out.update_targets.emplace(j, g.text_value());
    }
  }
  return out;
}

}  // namespace flatdst

#endif  // FLATDST_STATE_HPP_
