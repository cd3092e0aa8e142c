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

// Deterministic templated multi-domain dialogues. Each user turn sets,
// changes, releases ("don't care") or retracts up to three slots, and every
// value it assigns is spoken verbatim in that turn.

#ifndef FLATDST_SYNTHETIC_HPP_
#define FLATDST_SYNTHETIC_HPP_

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <memory>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "flatdst/dataset.hpp"
#include "flatdst/error.hpp"
#include "flatdst/state.hpp"

namespace flatdst {

namespace synthetic_detail {

inline std::vector<std::string> area_values() {
  return {"north", "south", "east", "west", "centre", "riverside", "old town", "harbour",
          "market square", "university quarter", "castle hill", "docklands", "west end",
          "east end", "north bank", "south bank", "lakeside", "hillside", "city centre",
          "green park", "kings cross", "queens gate", "mill road", "station quarter",
          "cathedral close", "new town", "bridge street", "canal side", "forest edge",
          "sea front", "north gate", "south gate", "upper town", "lower town", "chapel field",
          "abbey road", "meadow view", "silver lane", "oak ridge", "willow bend"};
}

inline std::vector<std::string> food_values() {
  return {"italian", "chinese", "indian", "thai", "french", "spanish", "greek", "turkish",
          "japanese", "korean", "vietnamese", "mexican", "lebanese", "moroccan", "british",
          "german", "portuguese", "persian", "ethiopian", "brazilian", "peruvian", "russian",
          "polish", "swedish", "danish", "irish", "scottish", "cuban", "jamaican", "malaysian",
          "indonesian", "filipino", "nepalese", "afghan", "caribbean", "hungarian", "austrian",
          "belgian", "swiss", "north african"};
}

inline std::vector<std::string> time_values() {
  std::vector<std::string> out;
  for (int h = 1; h <= 12; ++h) out.push_back(std::to_string(h) + " pm");
  for (int h = 1; h <= 12; ++h) out.push_back(std::to_string(h) + " 30 pm");
  for (int h = 5; h <= 12; ++h) out.push_back(std::to_string(h) + " am");
  for (int h = 5; h <= 12; ++h) out.push_back(std::to_string(h) + " 30 am");
  return out;
}

inline std::vector<std::string> hotel_values() {
  return {"grand plaza", "river inn", "alpha lodge", "the regency", "park view hotel",
          "harbour house", "the white swan", "golden gate inn", "castle lodge", "meadow inn",
          "kingsley hotel", "the old mill", "station hotel", "lakeside lodge", "the crown",
          "bluebell house", "granta hotel", "the ashley", "hamilton lodge", "acorn guest house",
          "city stop", "the lensfield", "gonville hotel", "worth house", "the cambridge belfry",
          "avalon", "leverton house", "carolina bed and breakfast", "allenbell", "finches",
          "the huntingdon marriott", "warkworth house", "a and b guest house", "alexander inn",
          "arbury lodge", "aylesbray lodge", "bridge guest house", "cityroomz", "el shaddai",
          "express by holiday inn"};
}

inline std::vector<std::string> people_values() {
  std::vector<std::string> out;
  for (int n = 1; n <= 20; ++n) out.push_back(std::to_string(n));
  return out;
}

inline std::vector<std::string> place_values() {
  return {"the station", "the airport", "city museum", "botanic garden", "the cinema",
          "central library", "the theatre", "kings college", "the market", "the stadium",
          "the hospital", "the cathedral", "science park", "the zoo", "town hall",
          "the arcade", "the pier", "the gallery", "the university", "the castle",
          "the aquarium", "bus terminal", "the harbour", "the bridge", "the abbey",
          "the bowling alley", "the ice rink", "the swimming pool", "the concert hall",
          "the opera house", "the boat club", "the golf course", "the town square",
          "the lighthouse", "the observatory", "the old mill", "the river inn", "grand plaza",
          "alpha lodge", "the regency"};
}

struct SlotTemplates {
  std::vector<std::string> set;
  std::string phrase;  // natural name used by change / dontcare / retract
};

inline std::vector<SlotTemplates> default_templates() {
  return {
      {{"i want {v} food", "i am looking for a {v} restaurant", "somewhere that serves {v} food"},
       "type of food"},
      {{"a restaurant in the {v} area", "the restaurant should be in the {v}"},
       "restaurant area"},
      {{"book a table at {v}", "the table should be for {v}"}, "table time"},
      {{"i want to stay at {v}", "please find the hotel called {v}"}, "hotel name"},
      {{"a hotel in the {v}", "the hotel should be in the {v} area"}, "hotel area"},
      {{"the room is for {v} people", "book the hotel for {v} people"}, "number of guests"},
      {{"i need a taxi from {v}", "pick me up at {v}"}, "pickup place"},
      {{"take me to {v}", "the taxi should go to {v}"}, "taxi destination"},
      {{"the taxi should leave at {v}", "i want to leave at {v}"}, "departure time"},
  };
}

inline std::string fill(std::string_view tmpl, std::string_view value) {
  std::string out(tmpl);
  const auto pos = out.find("{v}");
  if (pos != std::string::npos) out.replace(pos, 3, value);
  return out;
}

}  // namespace synthetic_detail

// Three domains of three slots each (J = 9).
inline Schema default_synthetic_schema() {
  namespace sd = synthetic_detail;
  std::vector<SlotKey> keys{{"restaurant", "food"},      {"restaurant", "area"},
                            {"restaurant", "book time"}, {"hotel", "name"},
                            {"hotel", "area"},           {"hotel", "book people"},
                            {"taxi", "departure"},       {"taxi", "destination"},
                            {"taxi", "leave at"}};
  std::vector<std::vector<std::string>> lex{sd::food_values(),   sd::area_values(),
                                            sd::time_values(),   sd::hotel_values(),
                                            sd::area_values(),   sd::people_values(),
                                            sd::place_values(),  sd::place_values(),
                                            sd::time_values()};
  return Schema(std::move(keys), std::move(lex));
}

// The first `num_slots` pairs of the default schema.
inline Schema truncated_synthetic_schema(std::size_t num_slots) {
  const Schema full = default_synthetic_schema();
  if (num_slots < 1 || num_slots > full.size()) {
    throw ContractError("synthetic schema supports 1.." + std::to_string(full.size()) +
                        " slots, asked for " + std::to_string(num_slots));
  }
  std::vector<SlotKey> keys(full.slots().begin(),
                            full.slots().begin() + static_cast<std::ptrdiff_t>(num_slots));
  std::vector<std::vector<std::string>> lex;
  for (std::size_t j = 0; j < num_slots; ++j) lex.push_back(full.lexicon(j));
  return Schema(std::move(keys), std::move(lex));
}

// Generates `n_dialogues` dialogues of 1..max_turns turns over the schema.
// Identical arguments give identical output. Slots beyond the default nine
// fall back to generic phrasing.
inline std::vector<DialogueRecord> generate_synthetic_corpus(const SchemaPtr& schema,
                                                             std::size_t n_dialogues,
                                                             int max_turns,
                                                             std::uint64_t seed) {
  namespace sd = synthetic_detail;
  if (!schema || schema->empty()) throw ContractError("synthetic corpus needs a non-empty schema");
  if (max_turns < 1) throw ContractError("max_turns must be >= 1");
  for (std::size_t j = 0; j < schema->size(); ++j) {
    if (schema->lexicon(j).empty()) {
      throw ContractError("schema slot " + (*schema)[j].label() + " has no candidate values");
    }
  }
  const auto defaults = sd::default_templates();
  const Schema reference = default_synthetic_schema();
  std::vector<sd::SlotTemplates> templates;
  for (std::size_t j = 0; j < schema->size(); ++j) {
    const auto& key = (*schema)[j];
    auto k = reference.find(key.domain, key.slot);
    if (k) {
      templates.push_back(defaults[*k]);
    } else {
      templates.push_back({{"the " + key.domain + " " + key.slot + " should be {v}"},
                           key.domain + " " + key.slot});
    }
  }

  const auto& domains = schema->domains();
  std::vector<std::vector<std::size_t>> slots_of(domains.size());
  for (std::size_t j = 0; j < schema->size(); ++j) {
    for (std::size_t d = 0; d < domains.size(); ++d) {
      if (domains[d] == (*schema)[j].domain) slots_of[d].push_back(j);
    }
  }

  std::mt19937_64 rng(seed);
  auto uniform = [&rng](std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
  };
  auto chance = [&rng](double p) { return std::uniform_real_distribution<double>(0, 1)(rng) < p; };

  static const std::vector<std::string> kThanks{"thank you", "that sounds good", "ok great",
                                                "thanks , that is all for now"};
  static const std::vector<std::string> kChange{"actually , make the {p} {v} instead",
                                                "sorry , change the {p} to {v}"};
  static const std::vector<std::string> kDontCare{"i do not care about the {p}",
                                                  "any {p} is fine"};
  static const std::vector<std::string> kRetract{"forget about the {p}",
                                                 "never mind the {p}"};
  static const std::vector<std::string> kSystemOpen{"what else can i help you with ?",
                                                    "is there anything else ?",
                                                    "sure , anything more ?"};

  std::vector<DialogueRecord> out;
  out.reserve(n_dialogues);
  for (std::size_t n = 0; n < n_dialogues; ++n) {
    DialogueRecord record;
    char id[64];
    std::snprintf(id, sizeof id, "syn-%llu-%04zu", static_cast<unsigned long long>(seed), n);
    record.dialogue_id = id;

    const int turns = 1 + static_cast<int>(uniform(static_cast<std::size_t>(max_turns)));
    std::vector<std::size_t> order(domains.size());
    for (std::size_t d = 0; d < order.size(); ++d) order[d] = d;
    std::shuffle(order.begin(), order.end(), rng);
    const std::size_t n_domains = 1 + uniform(std::min<std::size_t>(3, domains.size()));

    DialogueState state(schema);
    for (int t = 1; t <= turns; ++t) {
      const std::size_t cur =
          order[std::min(n_domains - 1,
                         static_cast<std::size_t>((t - 1) * static_cast<int>(n_domains) / turns))];
      LabeledTurn lt;
      lt.turn.turn_index = t;
      if (t > 1) {
        lt.turn.system = chance(0.5)
                             ? kSystemOpen[uniform(kSystemOpen.size())]
                             : "do you need anything for the " + domains[cur] + " ?";
      }

      // 0..3 distinct slots to act on, biased to the current domain.
      const double r = std::uniform_real_distribution<double>(0, 1)(rng);
      std::size_t k = r < 0.1 ? 0 : r < 0.55 ? 1 : r < 0.85 ? 2 : 3;
      std::vector<std::size_t> chosen;
      for (int guard = 0; chosen.size() < k && guard < 50; ++guard) {
        std::size_t j;
        if (chance(0.8) && !slots_of[cur].empty()) {
          j = slots_of[cur][uniform(slots_of[cur].size())];
        } else {
          j = uniform(schema->size());
        }
        if (std::find(chosen.begin(), chosen.end(), j) == chosen.end()) chosen.push_back(j);
      }

      std::vector<std::string> clauses;
      for (std::size_t j : chosen) {
        const SlotValue& current = state[j];
        const auto& lex = schema->lexicon(j);
        const auto& tp = templates[j];
        auto fresh_value = [&] {
          std::string v = lex[uniform(lex.size())];
          for (int g = 0; g < 10 && current.is_text() && v == current.text_value(); ++g) {
            v = lex[uniform(lex.size())];
          }
          return v;
        };
        auto phrase = [&](const std::string& tmpl, const std::string& v) {
          std::string s = tmpl;
          const auto p = s.find("{p}");
          if (p != std::string::npos) s.replace(p, 3, tp.phrase);
          return sd::fill(s, v);
        };
        if (current.is_null()) {
          if (chance(0.12)) {
            clauses.push_back(phrase(kDontCare[uniform(kDontCare.size())], ""));
            state.set(j, SlotValue::dontcare());
          } else {
            const std::string v = fresh_value();
            clauses.push_back(sd::fill(tp.set[uniform(tp.set.size())], v));
            state.set(j, SlotValue::text(v));
          }
        } else {
          const double a = std::uniform_real_distribution<double>(0, 1)(rng);
          if (a < 0.55) {
            const std::string v = fresh_value();
            if (current.is_text() && v == current.text_value()) continue;
            clauses.push_back(chance(0.5) ? phrase(kChange[uniform(kChange.size())], v)
                                          : sd::fill(tp.set[uniform(tp.set.size())], v));
            state.set(j, SlotValue::text(v));
          } else if (a < 0.75 && !current.is_dontcare()) {
            clauses.push_back(phrase(kDontCare[uniform(kDontCare.size())], ""));
            state.set(j, SlotValue::dontcare());
          } else {
            clauses.push_back(phrase(kRetract[uniform(kRetract.size())], ""));
            state.set(j, SlotValue::null());
          }
        }
      }
      if (clauses.empty()) {
        lt.turn.user = kThanks[uniform(kThanks.size())];
      } else {
        std::string u;
        for (std::size_t c = 0; c < clauses.size(); ++c) {
          if (c) u += c + 1 == clauses.size() ? " and " : " , ";
          u += clauses[c];
        }
        lt.turn.user = u + " .";
      }
      lt.gold = state;
      record.turns.push_back(std::move(lt));
    }
    out.push_back(std::move(record));
  }
  return out;
}

}  // namespace flatdst

#endif  // FLATDST_SYNTHETIC_HPP_
