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

// Shared fixtures and random generators for the test suites.

#ifndef FLATDST_TESTS_TEST_UTIL_HPP_
#define FLATDST_TESTS_TEST_UTIL_HPP_

#include <cstdint>
#include <filesystem>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "flatdst/dst_model.hpp"
#include "flatdst/state.hpp"
#include "flatdst/synthetic.hpp"
#include "flatdst/tensor.hpp"
#include "flatdst/trainer.hpp"

namespace flatdst::testing {

class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  std::size_t index(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng_); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  double real(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  bool coin(double p = 0.5) { return real(0, 1) < p; }

  template <Real T>
  Tensor<T> tensor(std::size_t rows, std::size_t cols, double scale = 1.0) {
    Tensor<T> t = Tensor<T>::matrix(rows, cols);
    for (auto& x : t.data()) x = static_cast<T>(real(-scale, scale));
    return t;
  }

  std::mt19937_64& engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

inline ModelConfig toy_config(int layers = 2, int heads = 2, int hidden = 32) {
  ModelConfig c;
  c.num_layers = layers;
  c.num_heads = heads;
  c.hidden_dim = hidden;
  c.ffn_dim = 4 * hidden;
  c.max_positions = 256;
  c.vocab_size = 1;
  return c;
}

inline SchemaPtr small_schema(std::size_t j = 4) {
  return std::make_shared<const Schema>(truncated_synthetic_schema(j));
}

// A model plus the small synthetic corpus its vocabulary was built from.
template <Real T>
struct ModelFixture {
  SchemaPtr schema;
  std::vector<DialogueRecord> corpus;
  std::unique_ptr<DstModel<T>> model;
};

template <Real T>
ModelFixture<T> make_model(std::size_t j = 4, std::uint64_t seed = 11,
                           ReuseSpec reuse = default_reuse_spec(), int layers = 2,
                           std::size_t dialogues = 6) {
  ModelFixture<T> f;
  f.schema = small_schema(j);
  f.corpus = generate_synthetic_corpus(f.schema, dialogues, 4, seed);
  Vocab vocab = build_vocab(*f.schema, {&f.corpus});
  f.model = std::make_unique<DstModel<T>>(toy_config(layers), std::move(vocab), f.schema, reuse, seed);
  return f;
}

inline DialogueState random_state(const SchemaPtr& schema, Gen& g) {
  static const std::vector<std::string> words{"north", "south", "cheap", "thai", "7 pm", "the grand",
                                              "2", "city centre", "early bird cafe"};
  DialogueState s(schema);
  for (std::size_t j = 0; j < schema->size(); ++j) {
    const int k = g.integer(0, 3);
    if (k == 1) s.set(j, SlotValue::dontcare());
    if (k >= 2) s.set(j, SlotValue::text(words[g.index(words.size())]));
  }
  return s;
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("flatdst_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace flatdst::testing

#endif  // FLATDST_TESTS_TEST_UTIL_HPP_
