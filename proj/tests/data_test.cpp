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


#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "flatdst/dataset.hpp"
#include "flatdst/input.hpp"
#include "flatdst/synthetic.hpp"
#include "flatdst/trainer.hpp"
#include "flatdst/vocab.hpp"
#include "test_util.hpp"

namespace flatdst {
namespace {

using testing::Gen;
using testing::small_schema;
using testing::temp_dir;

void write_file(const std::filesystem::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  out << s;
}

TEST(Tokenize, EmptyTextGivesNoIds) {
  EXPECT_TRUE(tokenize("", Vocab()).empty());
  EXPECT_TRUE(tokenize("   ", Vocab()).empty());
}

TEST(Tokenize, LowercasesAndSplitsPunctuation) {
  const Vocab v = Vocab::build(std::vector<std::string>{"cheap , please"});
  const std::vector<int> expected{v.id("cheap"), v.id(","), v.id("please")};
  EXPECT_EQ(tokenize("Cheap, please", v), expected);
  EXPECT_EQ(split_tokens("Cheap, please"), (std::vector<std::string>{"cheap", ",", "please"}));
}

TEST(Tokenize, UnknownWordsMapToUnk) {
  const Vocab v = Vocab::build(std::vector<std::string>{"north"});
  EXPECT_EQ(tokenize("north pole", v), (std::vector<int>{v.id("north"), tokens::kUnk}));
}

TEST(Tokenize, ReservedMarkersStayWhole) {
  EXPECT_EQ(split_tokens("a [slot] b"), (std::vector<std::string>{"a", "[SLOT]", "b"}));
}

TEST(Tokenize, DetokenizeRoundTrip) {
  const auto schema = small_schema(9);
  const auto corpus = generate_synthetic_corpus(schema, 20, 5, 7);
  const Vocab v = build_vocab(*schema, {&corpus});
  Gen g(1);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<int> ids(g.index(12));
    for (auto& id : ids) id = static_cast<int>(tokens::kReserved.size() + g.index(v.size() - tokens::kReserved.size()));
    ASSERT_EQ(tokenize(detokenize(ids, v), v), ids);
  }
}

TEST(Vocab, ReservedIdsAreFixed) {
  const Vocab v;
  for (std::size_t i = 0; i < tokens::kReserved.size(); ++i) {
    EXPECT_EQ(v.id(std::string(tokens::kReserved[i])), static_cast<int>(i));
  }
  EXPECT_EQ(v.id("[PAD]"), 0);
}

TEST(Vocab, IdTokenRoundTrip) {
  const Vocab v = Vocab::build(std::vector<std::string>{"the grand hotel , 7 pm"});
  for (std::size_t i = 0; i < v.size(); ++i) {
    EXPECT_EQ(v.id(v.token(static_cast<int>(i))), static_cast<int>(i));
  }
  EXPECT_THROW(v.token(static_cast<int>(v.size())), IndexError);
}

TEST(Vocab, SaveLoadRoundTrip) {
  const auto dir = temp_dir("vocab");
  const Vocab v = Vocab::build(std::vector<std::string>{"north south east west"});
  v.save((dir / "vocab.txt").string());
  EXPECT_EQ(Vocab::load((dir / "vocab.txt").string()), v);
  write_file(dir / "bad.txt", "[CLS]\n[PAD]\n");
  EXPECT_THROW(Vocab::load((dir / "bad.txt").string()), ParseError);
}

TEST(Synthetic, ZeroDialoguesGiveEmptyCorpus) {
  EXPECT_TRUE(generate_synthetic_corpus(small_schema(), 0, 4, 42).empty());
}

TEST(Synthetic, SameSeedGivesIdenticalOutput) {
  const auto schema = small_schema(9);
  const auto a = generate_synthetic_corpus(schema, 30, 6, 42);
  const auto b = generate_synthetic_corpus(schema, 30, 6, 42);
  const auto c = generate_synthetic_corpus(schema, 30, 6, 43);
  std::string sa, sb, sc;
  for (const auto& r : a) sa += record_to_line(r) + "\n";
  for (const auto& r : b) sb += record_to_line(r) + "\n";
  for (const auto& r : c) sc += record_to_line(r) + "\n";
  EXPECT_EQ(sa, sb);
  EXPECT_NE(sa, sc);
}

TEST(Synthetic, TurnsAreConsecutiveAndStatesCoverSchema) {
  const auto schema = small_schema(9);
  for (const auto& r : generate_synthetic_corpus(schema, 40, 6, 5)) {
    ASSERT_FALSE(r.turns.empty());
    for (std::size_t t = 0; t < r.turns.size(); ++t) {
      EXPECT_EQ(r.turns[t].turn.turn_index, static_cast<int>(t + 1));
      EXPECT_EQ(r.turns[t].gold.size(), schema->size());
      EXPECT_FALSE(normalize_text(r.turns[t].turn.user).empty());
    }
    EXPECT_TRUE(r.turns[0].turn.system.empty());
  }
}

TEST(Synthetic, GoldValuesAreExtractable) {
  const auto schema = small_schema(9);
  for (std::uint64_t seed : {1u, 2u, 42u}) {
    for (const auto& r : generate_synthetic_corpus(schema, 50, 8, seed)) {
      std::set<std::string> seen;
      for (const auto& lt : r.turns) {
        for (auto& w : split_tokens(lt.turn.user)) seen.insert(w);
        for (std::size_t j = 0; j < lt.gold.size(); ++j) {
          if (!lt.gold[j].is_text()) continue;
          for (const auto& w : split_tokens(lt.gold[j].text_value())) {
            EXPECT_TRUE(seen.count(w)) << r.dialogue_id << " value " << lt.gold[j].str();
          }
        }
      }
    }
  }
}

TEST(Synthetic, ConsecutiveStatesRoundTrip) {
  const auto schema = small_schema(9);
  for (const auto& r : generate_synthetic_corpus(schema, 100, 8, 9)) {
    DialogueState prev(schema);
    for (const auto& lt : r.turns) {
      const auto d = derive_gold_operations(prev, lt.gold);
      ASSERT_EQ(apply_operations(prev, d.ops, d.update_targets), lt.gold);
      prev = lt.gold;
    }
  }
}

TEST(Synthetic, BuiltVocabCoversGoldValues) {
  const auto schema = small_schema(9);
  const auto corpus = generate_synthetic_corpus(schema, 50, 6, 3);
  const Vocab v = build_vocab(*schema, {&corpus});
  for (const auto& r : corpus) {
    for (const auto& lt : r.turns) {
      for (const auto& val : lt.gold.values()) {
        if (!val.is_text()) continue;
        for (int id : tokenize(val.text_value(), v)) EXPECT_NE(id, tokens::kUnk) << val.str();
      }
    }
  }
}

TEST(Dataset, SaveLoadRoundTrip) {
  const auto dir = temp_dir("dataset");
  const auto schema = small_schema(9);
  const auto corpus = generate_synthetic_corpus(schema, 25, 6, 11);
  save_dataset(corpus, (dir / "d.jsonl").string());
  EXPECT_EQ(load_dataset((dir / "d.jsonl").string(), schema), corpus);
  save_schema(*schema, (dir / "schema.json").string());
  EXPECT_EQ(load_schema((dir / "schema.json").string()), *schema);
}

TEST(Dataset, EmptyFileGivesEmptyList) {
  const auto dir = temp_dir("dataset_empty");
  write_file(dir / "e.jsonl", "");
  EXPECT_TRUE(load_dataset((dir / "e.jsonl").string(), small_schema()).empty());
}

TEST(Dataset, MissingStateNamesTheTurn) {
  const auto dir = temp_dir("dataset_bad");
  write_file(dir / "b.jsonl",
             "{\"dialogue_id\":\"ok\",\"turns\":[{\"turn\":1,\"user\":\"hi\",\"state\":[]}]}\n"
             "{\"dialogue_id\":\"d7\",\"turns\":[{\"turn\":1,\"user\":\"hi\",\"state\":[]},"
             "{\"turn\":2,\"system\":\"yes\",\"user\":\"north\"}]}\n");
  try {
    load_dataset((dir / "b.jsonl").string(), small_schema());
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find(":2"), std::string::npos) << msg;
    EXPECT_NE(msg.find("d7"), std::string::npos) << msg;
    EXPECT_NE(msg.find("turn 2"), std::string::npos) << msg;
  }
}

TEST(Dataset, MalformedJsonNamesTheLine) {
  const auto dir = temp_dir("dataset_json");
  write_file(dir / "b.jsonl", "\n{not json\n");
  try {
    load_dataset((dir / "b.jsonl").string(), small_schema());
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("b.jsonl:2"), std::string::npos) << e.what();
  }
}

TEST(Dataset, UnknownSlotIsRejected) {
  const auto dir = temp_dir("dataset_slot");
  write_file(dir / "b.jsonl",
             "{\"dialogue_id\":\"x\",\"turns\":[{\"user\":\"hi\",\"state\":[\"spa|area|north\"]}]}\n");
  EXPECT_THROW(load_dataset((dir / "b.jsonl").string(), small_schema()), ParseError);
}

class AssembleTest : public ::testing::Test {
 protected:
  SchemaPtr schema = small_schema(2);
  Vocab vocab = Vocab::build(std::vector<std::string>{
      "i want a cheap place ; what area ? north please", (*schema)[0].domain, (*schema)[0].slot,
      (*schema)[1].domain, (*schema)[1].slot});
};

TEST_F(AssembleTest, FirstTurnHasNullTuples) {
  const DialogueTurn empty{"", "", 0};
  const DialogueTurn curr{"", "i want a cheap place", 1};
  const auto in = assemble_encoder_input(empty, curr, DialogueState(schema), vocab, 256);
  ASSERT_EQ(in.num_slots(), 2u);
  EXPECT_TRUE(in.prev_turn.empty());
  EXPECT_EQ(in.token_ids[0], tokens::kCls);
  for (const auto& r : in.tuple_region) EXPECT_EQ(in.token_ids[r.end - 1], tokens::kNull);
  for (int t : in.type_ids) EXPECT_EQ(t, 0);
  EXPECT_LT(in.slot_marker[0], in.slot_marker[1]);
  for (std::size_t m : in.slot_marker) EXPECT_EQ(in.token_ids[m], tokens::kSlot);
}

TEST_F(AssembleTest, TupleRegionDetokenizesToTriple) {
  DialogueState prev(schema);
  prev.set(0, SlotValue::text("north"));
  prev.set(1, SlotValue::dontcare());
  const DialogueTurn p{"", "i want a cheap place", 1}, c{"what area ?", "north please", 2};
  const auto in = assemble_encoder_input(p, c, prev, vocab, 256);
  for (std::size_t j = 0; j < 2; ++j) {
    const auto& r = in.tuple_region[j];
    const std::span<const int> ids(in.token_ids.data() + r.begin, r.size());
    const std::string expected = detokenize(tokenize((*schema)[j].domain, vocab), vocab) + " - " +
                                 detokenize(tokenize((*schema)[j].slot, vocab), vocab) + " - " +
                                 prev[j].str();
    EXPECT_EQ(detokenize(ids, vocab), expected);
  }
  EXPECT_EQ(detokenize(std::span<const int>(in.token_ids.data() + in.curr_turn.begin,
                                            in.curr_turn.size()),
                       vocab),
            "what area ? ; north please");
}

TEST_F(AssembleTest, OverflowTruncatesDialogueFromTheLeft) {
  const DialogueTurn p{"", "i want a cheap place", 1}, c{"what area ?", "north please", 2};
  const DialogueState prev(schema);
  const auto full = assemble_encoder_input(p, c, prev, vocab, 256);
  const auto cut = assemble_encoder_input(p, c, prev, vocab, full.size() - 7);
  EXPECT_EQ(cut.size(), full.size() - 7);
  EXPECT_EQ(cut.truncated_tokens, 7u);
  EXPECT_FALSE(cut.warnings.empty());
  EXPECT_TRUE(cut.prev_turn.empty());
  EXPECT_EQ(cut.curr_turn.size(), full.curr_turn.size() - 2);
  EXPECT_EQ(cut.num_slots(), 2u);
  EXPECT_THROW(assemble_encoder_input(p, c, prev, vocab, 5), ContractError);
}

}  // namespace
}  // namespace flatdst
