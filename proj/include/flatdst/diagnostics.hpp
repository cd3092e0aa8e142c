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

#ifndef FLATDST_DIAGNOSTICS_HPP_
#define FLATDST_DIAGNOSTICS_HPP_

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "flatdst/dst_model.hpp"
#include "flatdst/gradcheck.hpp"
#include "flatdst/synthetic.hpp"
#include "flatdst/trainer.hpp"

namespace flatdst {

// A double-precision model on a small synthetic batch that contains at
// least one UPDATE slot.
struct GradCheckFixture {
  SchemaPtr schema;
  std::vector<DialogueRecord> corpus;
  std::unique_ptr<DstModel<double>> model;
  std::vector<TrainingExample> batch;  // batch[0] has an UPDATE target
};

inline GradCheckFixture make_gradcheck_fixture(const ModelConfig& config, std::size_t num_slots,
                                               std::uint64_t seed) {
  GradCheckFixture f;
  f.schema = std::make_shared<const Schema>(truncated_synthetic_schema(num_slots));
  f.corpus = generate_synthetic_corpus(f.schema, 4, 3, seed);
  Vocab vocab = build_vocab(*f.schema, {&f.corpus});
  f.model = std::make_unique<DstModel<double>>(config, std::move(vocab), f.schema,
                                               default_reuse_spec(), seed);
  std::vector<TrainingExample> all = f.model->make_examples(f.corpus);
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (all[i].targets.empty()) continue;
    f.batch.push_back(all[i]);
    f.batch.push_back(all[(i + 1) % all.size()]);
    break;
  }
  if (f.batch.empty()) throw ContractError("synthetic fixture has no UPDATE slot; try another seed");
  return f;
}

struct GradCheckSuite {
  GradCheckReport sop;
  GradCheckReport vg;
  GradCheckReport joint;
  double worst() const {
    return std::max({sop.max_relative_error, vg.max_relative_error, joint.max_relative_error});
  }
};

inline GradCheckSuite run_gradcheck_suite(GradCheckFixture& f, const GradCheckOptions& options) {
  const DstModel<double>& m = *f.model;
  const TrainingExample& ex = f.batch.front();
  const auto& [slot, value] = *ex.targets.begin();
  const std::size_t j = slot;
  const std::vector<int> gold = value;
  std::vector<Parameter<double>> params(m.params().begin(), m.params().end());
  GradCheckSuite out;
  out.sop = grad_check([&] { return m.sop_loss(m.encode(ex.input).slot_logits, ex.ops); }, params,
                       options);
  out.vg = grad_check(
      [&] {
        const EncoderOutput<double> enc = m.encode(ex.input);
        return m.vg_loss(m.select_reuse_states(enc, ex.input, j), gold);
      },
      params, options);
  out.joint = grad_check([&] { return m.joint_loss(f.batch).total; }, params, options);
  return out;
}

}  // namespace flatdst

#endif  // FLATDST_DIAGNOSTICS_HPP_
