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

// Which encoder positions the decoder may attend to when generating the
// value of slot j.

#ifndef FLATDST_REUSE_HPP_
#define FLATDST_REUSE_HPP_

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "flatdst/error.hpp"
#include "flatdst/input.hpp"

namespace flatdst {

enum class ReuseSelector : std::uint8_t {
  kFull,        // every encoder position
  kPrevTurn,    // tokens of the previous dialogue turn
  kCurrTurn,    // tokens of the current dialogue turn
  kCls,         // [CLS]
  kSlotMarker,  // the j-th [SLOT]
  kTupleDs,     // "domain - slot" of tuple j
  kTupleDsv,    // "domain - slot - value" of tuple j
};

class ReuseSpec {
 public:
  ReuseSpec() = default;

  static ReuseSpec of(std::initializer_list<ReuseSelector> selectors) {
    ReuseSpec s;
    for (auto sel : selectors) s.bits_ |= bit(sel);
    return s;
  }

  // "curr+slot", "full", "prev+curr+slot", ... Tokens: full, prev, curr,
  // cls, slot, ds, dsv.
  static ReuseSpec parse(std::string_view text) {
    ReuseSpec s;
    std::size_t start = 0;
    while (start <= text.size()) {
      const auto plus = text.find('+', start);
      const std::string_view tok =
          text.substr(start, plus == std::string_view::npos ? std::string_view::npos : plus - start);
      bool found = false;
      for (std::size_t i = 0; i < kTokens.size(); ++i) {
        if (tok == kTokens[i]) {
          s.bits_ |= static_cast<std::uint8_t>(1u << i);
          found = true;
        }
      }
      if (!found) {
        throw InvalidSpecError("unknown reuse selector '" + std::string(tok) + "' in '" +
                               std::string(text) + "'");
      }
      if (plus == std::string_view::npos) break;
      start = plus + 1;
    }
    return s;
  }

  bool has(ReuseSelector sel) const { return (bits_ & bit(sel)) != 0; }
  bool empty() const { return bits_ == 0; }

  // Canonical parseable name.
  std::string name() const {
    if (has(ReuseSelector::kFull)) return "full";
    std::string out;
    for (std::size_t i = 1; i < kTokens.size(); ++i) {
      if (bits_ & (1u << i)) {
        if (!out.empty()) out += '+';
        out += kTokens[i];
      }
    }
    return out;
  }

  // Human-readable label, e.g. "D_t+[SLOT]".
  std::string label() const {
    if (has(ReuseSelector::kFull)) return "Full re-use";
    static constexpr std::array<std::string_view, 7> kLabels{
        "", "D_{t-1}", "D_t", "[CLS]", "[SLOT]", "(d,s)", "(d,s,v)"};
    std::string out;
    for (std::size_t i = 1; i < kLabels.size(); ++i) {
      if (bits_ & (1u << i)) {
        if (!out.empty()) out += '+';
        out += kLabels[i];
      }
    }
    return out;
  }

  // Ordered encoder positions for slot j (0-based). FULL supersedes the
  // other selectors.
  std::vector<std::size_t> resolve(const EncodedInput& input, std::size_t j) const {
    if (j >= input.num_slots()) {
      throw ContractError("reuse slot index " + std::to_string(j) + " outside [0, " +
                          std::to_string(input.num_slots()) + ")");
    }
    std::vector<std::uint8_t> take(input.size(), 0);
    auto mark = [&take](Span s) {
      for (std::size_t p = s.begin; p < s.end; ++p) take[p] = 1;
    };
    if (has(ReuseSelector::kFull)) {
      mark({0, input.size()});
    } else {
      if (has(ReuseSelector::kPrevTurn)) mark(input.prev_turn);
      if (has(ReuseSelector::kCurrTurn)) mark(input.curr_turn);
      if (has(ReuseSelector::kCls)) mark(input.cls);
      if (has(ReuseSelector::kSlotMarker)) mark({input.slot_marker[j], input.slot_marker[j] + 1});
      if (has(ReuseSelector::kTupleDs)) mark(input.tuple_ds[j]);
      if (has(ReuseSelector::kTupleDsv)) mark(input.tuple_region[j]);
    }
    std::vector<std::size_t> out;
    for (std::size_t p = 0; p < take.size(); ++p) {
      if (take[p]) out.push_back(p);
    }
    if (out.empty()) {
      throw InvalidSpecError("reuse spec '" + name() + "' selects no positions for slot " +
                             std::to_string(j));
    }
    return out;
  }

  friend bool operator==(const ReuseSpec&, const ReuseSpec&) = default;

 private:
  static constexpr std::array<std::string_view, 7> kTokens{"full", "prev", "curr", "cls",
                                                           "slot", "ds",   "dsv"};
  static std::uint8_t bit(ReuseSelector s) {
    return static_cast<std::uint8_t>(1u << static_cast<unsigned>(s));
  }

  std::uint8_t bits_ = 0;
};

// The eight configurations of the reuse ablation, best-known first after
// full reuse.
inline std::vector<ReuseSpec> reuse_presets() {
  using S = ReuseSelector;
  return {
      ReuseSpec::of({S::kFull}),
      ReuseSpec::of({S::kPrevTurn, S::kCurrTurn, S::kSlotMarker}),
      ReuseSpec::of({S::kCurrTurn, S::kSlotMarker}),
      ReuseSpec::of({S::kCls, S::kSlotMarker}),
      ReuseSpec::of({S::kSlotMarker, S::kTupleDs}),
      ReuseSpec::of({S::kSlotMarker}),
      ReuseSpec::of({S::kCurrTurn, S::kSlotMarker, S::kTupleDsv}),
      ReuseSpec::of({S::kCurrTurn, S::kSlotMarker, S::kTupleDs}),
  };
}

inline ReuseSpec default_reuse_spec() {
  return ReuseSpec::of({ReuseSelector::kCurrTurn, ReuseSelector::kSlotMarker});
}

// Comma-separated preset or selector names, or "all" for every preset.
inline std::vector<ReuseSpec> parse_reuse_list(std::string_view text) {
  if (text == "all") return reuse_presets();
  std::vector<ReuseSpec> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    const auto tok = text.substr(start, comma == std::string_view::npos ? comma : comma - start);
    if (tok.empty()) throw InvalidSpecError("empty entry in reuse spec list");
    out.push_back(ReuseSpec::parse(tok));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace flatdst

#endif  // FLATDST_REUSE_HPP_
