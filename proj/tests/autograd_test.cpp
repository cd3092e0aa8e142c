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

#include <cmath>
#include <vector>

#include "flatdst/gradcheck.hpp"
#include "flatdst/ops.hpp"
#include "flatdst/transformer.hpp"
#include "test_util.hpp"

namespace flatdst {
namespace {

using testing::Gen;
using V = Var<double>;
using TD = Tensor<double>;

// x -> 3x with a backward rule that claims 2.
V wrong_triple(const V& x) {
  TD out = x.value();
  for (auto& v : out.data()) v *= 3.0;
  return V::op(std::move(out), {x}, [](V::Node& n) {
    auto& g = n.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += 2.0 * n.grad[i];
  });
}

TEST(Backward, QuadraticGradient) {
  ParameterSet<double> ps;
  V w = ps.add("w", TD(Shape{2}, std::vector<double>{1, 2}));
  backward(sum(mul(w, w)));
  EXPECT_EQ(w.grad(), TD(Shape{2}, std::vector<double>{2, 4}));
}

TEST(Backward, ConstantLossLeavesGradsZero) {
  ParameterSet<double> ps;
  V w = ps.add("w", TD(Shape{3}, 1.0));
  V c(TD::scalar(4.0));
  backward(c);
  for (double g : w.grad().data()) EXPECT_EQ(g, 0.0);
}

TEST(Backward, IdentityHasUnitGradient) {
  ParameterSet<double> ps;
  V w = ps.add("w", TD(Shape{5}, 0.3));
  backward(sum(w));
  for (double g : w.grad().data()) EXPECT_EQ(g, 1.0);
}

TEST(Backward, NonScalarLossIsRejected) {
  ParameterSet<double> ps;
  V w = ps.add("w", TD(Shape{2}, 1.0));
  EXPECT_THROW(backward(mul(w, w)), ContractError);
}

TEST(Backward, GradientsAccumulateUntilZeroed) {
  ParameterSet<double> ps;
  V w = ps.add("w", TD(Shape{2}, std::vector<double>{1, 2}));
  backward(sum(mul(w, w)));
  backward(sum(mul(w, w)));
  EXPECT_EQ(w.grad(), TD(Shape{2}, std::vector<double>{4, 8}));
  ps.zero_grad();
  for (double g : w.grad().data()) EXPECT_EQ(g, 0.0);
}

TEST(Backward, CompositeEqualsSumOfParts) {
  Gen g(1);
  ParameterSet<double> ps;
  V w = ps.add("w", g.tensor<double>(3, 4));
  V x(g.tensor<double>(2, 3));
  auto l1 = [&] { return sum(tanh(matmul(x, w))); };
  auto l2 = [&] { return mean(mul(w, w)); };
  backward(l1());
  TD g1 = w.grad();
  ps.zero_grad();
  backward(l2());
  TD g2 = w.grad();
  ps.zero_grad();
  backward(add(l1(), l2()));
  for (std::size_t i = 0; i < g1.size(); ++i) EXPECT_NEAR(w.grad()[i], g1[i] + g2[i], 1e-12);
}

TEST(Backward, NoGradGuardRecordsNothing) {
  ParameterSet<double> ps;
  V w = ps.add("w", TD(Shape{2}, 1.0));
  V y;
  {
    NoGradGuard guard;
    y = sum(mul(w, w));
  }
  EXPECT_FALSE(y.requires_grad());
  EXPECT_TRUE(grad_enabled());
}

TEST(Parameters, NamesAreUnique) {
  ParameterSet<double> ps;
  ps.add("a", TD(Shape{1}));
  EXPECT_THROW(ps.add("a", TD(Shape{1})), ContractError);
}

TEST(Parameters, EveryTrainableParameterReachedGetsGradient) {
  Gen g(2);
  ParameterSet<double> ps;
  V w1 = ps.add("w1", g.tensor<double>(3, 3));
  V w2 = ps.add("w2", g.tensor<double>(3, 3));
  V x(g.tensor<double>(2, 3));
  backward(sum(gelu(matmul(tanh(matmul(x, w1)), w2))));
  for (const auto& p : ps) {
    bool nonzero = false;
    for (double v : p.var.grad().data()) nonzero = nonzero || v != 0.0;
    EXPECT_TRUE(nonzero) << p.name;
  }
}

TEST(GradCheck, QuadraticIsExact) {
  Gen g(3);
  ParameterSet<double> ps;
  V w = ps.add("w", g.tensor<double>(4, 3));
  const std::vector<Parameter<double>> params(ps.begin(), ps.end());
  const auto r = grad_check([&] { return sum(mul(w, w)); }, params);
  EXPECT_LT(r.max_relative_error, 1e-7);
  EXPECT_EQ(r.coordinates_checked, 12u);
}

TEST(GradCheck, TinyAttentionLoss) {
  Gen g(4);
  ParameterSet<double> ps;
  AttentionWeights<double> w;
  const std::size_t d = 4;
  w.wq = ps.add("wq", g.tensor<double>(d, d, 0.5));
  w.bq = ps.add("bq", g.tensor<double>(1, d, 0.5));
  w.wk = ps.add("wk", g.tensor<double>(d, d, 0.5));
  w.wv = ps.add("wv", g.tensor<double>(d, d, 0.5));
  w.bv = ps.add("bv", g.tensor<double>(1, d, 0.5));
  w.wo = ps.add("wo", g.tensor<double>(d, d, 0.5));
  w.bo = ps.add("bo", g.tensor<double>(1, d, 0.5));
  V x = ps.add("x", g.tensor<double>(3, d));
  const std::vector<Parameter<double>> params(ps.begin(), ps.end());
  const auto r = grad_check(
      [&] { return sum(tanh(attention(x, x, build_encoder_mask(3), w, 2))); }, params);
  EXPECT_LT(r.max_relative_error, 1e-4);
}

TEST(GradCheck, FrozenParametersAreExcluded) {
  Gen g(5);
  ParameterSet<double> ps;
  V w = ps.add("w", g.tensor<double>(2, 2));
  V f = ps.add("frozen", g.tensor<double>(2, 2), false);
  const std::vector<Parameter<double>> params(ps.begin(), ps.end());
  const auto r = grad_check([&] { return sum(mul(matmul(w, f), w)); }, params);
  EXPECT_EQ(r.parameters_checked, 1u);
  EXPECT_EQ(r.coordinates_checked, 4u);
  EXPECT_EQ(r.worst_parameter, "w");
}

TEST(GradCheck, WrongBackwardRuleIsCaught) {
  ParameterSet<double> ps;
  V w = ps.add("w", TD(Shape{3}, std::vector<double>{0.5, -1.0, 2.0}));
  const std::vector<Parameter<double>> params(ps.begin(), ps.end());
  const auto r = grad_check([&] { return sum(mul(wrong_triple(w), w)); }, params);
  EXPECT_GT(r.max_relative_error, 1e-4);
}

TEST(GradCheck, NonDeterministicLossIsRejected) {
  ParameterSet<double> ps;
  V w = ps.add("w", TD(Shape{1}, 1.0));
  const std::vector<Parameter<double>> params(ps.begin(), ps.end());
  int calls = 0;
  EXPECT_THROW(grad_check(
                   [&] {
                     ++calls;
                     return scale(sum(w), static_cast<double>(calls));
                   },
                   params),
               DeterminismError);
}

TEST(GradCheck, EpsOutsideRangeIsRejected) {
  ParameterSet<double> ps;
  V w = ps.add("w", TD(Shape{1}, 1.0));
  const std::vector<Parameter<double>> params(ps.begin(), ps.end());
  GradCheckOptions o;
  o.eps = 1e-2;
  EXPECT_THROW(grad_check([&] { return sum(w); }, params, o), ContractError);
}

TEST(Mask, EncoderMaskIsAllVisible) {
  EXPECT_TRUE(build_encoder_mask(1).all_visible());
  const auto m = build_encoder_mask(3);
  EXPECT_EQ(m.rows(), 3u);
  EXPECT_EQ(m.cols(), 3u);
  EXPECT_EQ(m.masked_count(), 0u);
  EXPECT_THROW(build_encoder_mask(0), ContractError);
}

TEST(Mask, DecoderMaskWithoutReuseIsCausal) {
  const auto m = build_decoder_mask(0, 3);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(m.visible(i, j), j <= i);
  }
}

TEST(Mask, FirstDecoderRowSeesReuseBlockAndItself) {
  const auto m = build_decoder_mask(2, 1);
  EXPECT_EQ(m.cols(), 3u);
  EXPECT_TRUE(m.all_visible());
}

TEST(Mask, DecoderRowOneOfThree) {
  const auto m = build_decoder_mask(2, 3);
  const std::vector<double> expected{0, 0, 0, 0, kMaskedOut};
  for (std::size_t j = 0; j < 5; ++j) EXPECT_EQ(m.entry(1, j), expected[j]) << j;
}

TEST(Mask, MaskedCountLaw) {
  for (std::size_t r = 0; r < 6; ++r) {
    for (std::size_t d = 1; d < 12; ++d) {
      EXPECT_EQ(build_decoder_mask(r, d).masked_count(), d * (d - 1) / 2);
    }
  }
}

}  // namespace
}  // namespace flatdst
