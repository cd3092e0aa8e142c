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

// Dataset and schema files.
//
// A dataset is JSON Lines, one dialogue per line:
//   {"dialogue_id": "d1", "turns": [
//     {"turn": 1, "system": "", "user": "...", "state": ["hotel|area|north"]}, ...]}
// "state" lists every non-NULL gold pair of the turn as "domain|slot|value";
// omitted pairs are NULL. See docs/formats.md for the grammar.

#ifndef FLATDST_DATASET_HPP_
#define FLATDST_DATASET_HPP_

#include <cstddef>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "flatdst/error.hpp"
#include "flatdst/state.hpp"

namespace flatdst {

struct LabeledTurn {
  DialogueTurn turn;
  DialogueState gold;

  friend bool operator==(const LabeledTurn&, const LabeledTurn&) = default;
};

struct DialogueRecord {
  std::string dialogue_id;
  std::vector<LabeledTurn> turns;

  friend bool operator==(const DialogueRecord&, const DialogueRecord&) = default;
};

inline nlohmann::ordered_json schema_to_json(const Schema& schema) {
  nlohmann::ordered_json slots = nlohmann::ordered_json::array();
  for (std::size_t j = 0; j < schema.size(); ++j) {
    nlohmann::ordered_json s;
    s["domain"] = schema[j].domain;
    s["slot"] = schema[j].slot;
    s["values"] = schema.lexicon(j);
    slots.push_back(std::move(s));
  }
  nlohmann::ordered_json out;
  out["slots"] = std::move(slots);
  return out;
}

inline Schema schema_from_json(const nlohmann::json& j, const std::string& where) {
  try {
    std::vector<SlotKey> keys;
    std::vector<std::vector<std::string>> lexicon;
    for (const auto& s : j.at("slots")) {
      keys.push_back({s.at("domain").get<std::string>(), s.at("slot").get<std::string>()});
      lexicon.push_back(s.contains("values") ? s["values"].get<std::vector<std::string>>()
                                             : std::vector<std::string>{});
    }
    return Schema(std::move(keys), std::move(lexicon));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(where + ": malformed schema: " + e.what());
  } catch (const ContractError& e) {
    throw ParseError(where + ": " + e.what());
  }
}

inline Schema load_schema(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open schema file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  return schema_from_json(j, path);
}

inline void save_schema(const Schema& schema, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write schema file " + path);
  out << schema_to_json(schema).dump(2) << '\n';
}

inline std::string record_to_line(const DialogueRecord& record) {
  nlohmann::ordered_json j;
  j["dialogue_id"] = record.dialogue_id;
  nlohmann::ordered_json turns = nlohmann::ordered_json::array();
  for (const auto& t : record.turns) {
    nlohmann::ordered_json jt;
    jt["turn"] = t.turn.turn_index;
    jt["system"] = t.turn.system;
    jt["user"] = t.turn.user;
    jt["state"] = t.gold.entries();
    turns.push_back(std::move(jt));
  }
  j["turns"] = std::move(turns);
  return j.dump();
}

inline DialogueState parse_state_entries(const nlohmann::json& entries, const SchemaPtr& schema,
                                         const std::string& where) {
  DialogueState state(schema);
  for (const auto& e : entries) {
    const std::string s = e.get<std::string>();
    const auto p1 = s.find('|');
    const auto p2 = p1 == std::string::npos ? p1 : s.find('|', p1 + 1);
    if (p2 == std::string::npos) {
      throw ParseError(where + ": state entry '" + s + "' is not domain|slot|value");
    }
    const auto j = schema->find(s.substr(0, p1), s.substr(p1 + 1, p2 - p1 - 1));
    if (!j) throw ParseError(where + ": unknown (domain, slot) in '" + s + "'");
    state.set(*j, SlotValue::parse(s.substr(p2 + 1)));
  }
  return state;
}

inline DialogueRecord record_from_line(const std::string& line, const SchemaPtr& schema,
                                       const std::string& where) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(where + ": " + e.what());
  }
  DialogueRecord record;
  std::string ctx = where;
  try {
    record.dialogue_id = j.at("dialogue_id").get<std::string>();
    ctx = where + " (dialogue " + record.dialogue_id + ")";
    int index = 0;
    for (const auto& jt : j.at("turns")) {
      ++index;
      const std::string tctx = ctx + " turn " + std::to_string(index);
      if (jt.contains("turn") && jt["turn"].get<int>() != index) {
        throw ParseError(tctx + ": turn index " + std::to_string(jt["turn"].get<int>()) +
                         " is not consecutive");
      }
      if (!jt.contains("state")) throw ParseError(tctx + ": missing gold state");
      LabeledTurn t;
      t.turn.turn_index = index;
      t.turn.system = jt.value("system", std::string{});
      t.turn.user = jt.at("user").get<std::string>();
      if (normalize_text(t.turn.user).empty()) {
        throw ParseError(tctx + ": empty user utterance");
      }
      t.gold = parse_state_entries(jt["state"], schema, tctx);
      record.turns.push_back(std::move(t));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(ctx + ": " + e.what());
  }
  return record;
}

inline std::vector<DialogueRecord> load_dataset(const std::string& path, const SchemaPtr& schema) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open dataset " + path);
  std::vector<DialogueRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(record_from_line(line, schema, path + ":" + std::to_string(lineno)));
  }
  return out;
}

inline void save_dataset(const std::vector<DialogueRecord>& records, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write dataset " + path);
  for (const auto& r : records) out << record_to_line(r) << '\n';
}

inline std::size_t turn_count(const std::vector<DialogueRecord>& records) {
  std::size_t n = 0;
  for (const auto& r : records) n += r.turns.size();
  return n;
}

}  // namespace flatdst

#endif  // FLATDST_DATASET_HPP_
