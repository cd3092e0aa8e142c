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
#include <limits>
#include <vector>

#include "flatdst/ops.hpp"
#include "test_util.hpp"

namespace flatdst {
namespace {

using testing::Gen;
using V = Var<double>;
using TD = Tensor<double>;

TEST(Tensor, SizeMustMatchShape) {
  EXPECT_THROW(TD(Shape{2, 3}, std::vector<double>(5)), DimensionError);
  TD t(Shape{2, 3}, std::vector<double>(6, 1.0));
  EXPECT_EQ(t.size(), 6u);
  EXPECT_EQ(t.rows(), 2u);
  EXPECT_EQ(t.cols(), 3u);
}

TEST(Tensor, RankOneIsARow) {
  TD t(Shape{4});
  EXPECT_EQ(t.rows(), 1u);
  EXPECT_EQ(t.cols(), 4u);
}

TEST(Matmul, IdentityLeavesMatrixUnchanged) {
  V eye(TD::from_rows({{1, 0}, {0, 1}}));
  V m(TD::from_rows({{1, 2}, {3, 4}}));
  EXPECT_EQ(matmul(eye, m).value(), TD::from_rows({{1, 2}, {3, 4}}));
}

TEST(Matmul, RowTimesColumn) {
  V a(TD::from_rows({{1, 2}}));
  V b(TD::from_rows({{3}, {4}}));
  EXPECT_EQ(matmul(a, b).value(), TD::from_rows({{11}}));
}

TEST(Matmul, MatchesTripleLoop) {
  Gen g(1);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t m = 1 + g.index(5), k = 1 + g.index(5), n = 1 + g.index(5);
    TD a = g.tensor<double>(m, k), b = g.tensor<double>(k, n);
    TD c = matmul(V(a), V(b)).value();
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        double s = 0;
        for (std::size_t p = 0; p < k; ++p) s += a.at(i, p) * b.at(p, j);
        EXPECT_NEAR(c.at(i, j), s, 1e-12);
      }
    }
  }
}

TEST(Matmul, ThreeByFourTimesFourByTwo) {
  Gen g(2);
  TD a = g.tensor<double>(3, 4), b = g.tensor<double>(4, 2);
  TD c = matmul(V(a), V(b)).value();
  ASSERT_EQ(c.shape(), (Shape{3, 2}));
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 2; ++j) {
      double s = 0;
      for (std::size_t p = 0; p < 4; ++p) s += a.at(i, p) * b.at(p, j);
      EXPECT_NEAR(c.at(i, j), s, 1e-12);
    }
  }
}

TEST(Matmul, ShapeMismatchNamesBothShapes) {
  V a(TD::matrix(2, 3)), b(TD::matrix(2, 3));
  try {
    matmul(a, b);
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[2x3] x [2x3]"), std::string::npos) << msg;
  }
}

TEST(Matmul, TransposedVariantsAgree) {
  Gen g(3);
  TD a = g.tensor<double>(3, 5), b = g.tensor<double>(4, 5);
  TD bt = TD::matrix(5, 4);
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 5; ++j) bt.at(j, i) = b.at(i, j);
  }
  TD direct = matmul(V(a), V(bt)).value();
  TD nt = matmul_nt(V(a), V(b)).value();
  for (std::size_t i = 0; i < direct.size(); ++i) EXPECT_NEAR(direct[i], nt[i], 1e-12);
}

TEST(MaskedSoftmax, UniformOverEqualLogits) {
  V x(TD::from_rows({{0, 0, 0}}));
  TD p = masked_softmax(x, AttentionMask(1, 3)).value();
  for (int j = 0; j < 3; ++j) EXPECT_NEAR(p[j], 1.0 / 3.0, 1e-15);
}

TEST(MaskedSoftmax, SingleVisibleEntryTakesAllMass) {
  V x(TD::from_rows({{5, 1}}));
  const auto mask = AttentionMask::from_entries(1, 2, {0.0, -std::numeric_limits<double>::infinity()});
  TD p = masked_softmax(x, mask).value();
  EXPECT_EQ(p[0], 1.0);
  EXPECT_EQ(p[1], 0.0);
}

TEST(MaskedSoftmax, MaskedThirdEntry) {
  V x(TD::from_rows({{1, 2, 3}}));
  const auto mask = AttentionMask::from_entries(1, 3, {0.0, 0.0, kMaskedOut});
  TD p = masked_softmax(x, mask).value();
  const double z = std::exp(1.0) + std::exp(2.0);
  EXPECT_NEAR(p[0], std::exp(1.0) / z, 1e-15);
  EXPECT_NEAR(p[1], std::exp(2.0) / z, 1e-15);
  EXPECT_EQ(p[2], 0.0);
}

TEST(MaskedSoftmax, FullyMaskedRowIsRejected) {
  EXPECT_THROW(AttentionMask::from_entries(1, 2, {kMaskedOut, kMaskedOut}), InvalidMaskError);
  AttentionMask m(2, 2);
  m.hide(1, 0);
  m.hide(1, 1);
  EXPECT_THROW(masked_softmax(V(TD::matrix(2, 2)), m), InvalidMaskError);
}

TEST(MaskedSoftmax, RowsSumToOneForRandomMasks) {
  Gen g(4);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t r = 1 + g.index(6), c = 1 + g.index(8);
    AttentionMask m(r, c);
    for (std::size_t i = 0; i < r; ++i) {
      const std::size_t keep = g.index(c);
      for (std::size_t j = 0; j < c; ++j) {
        if (j != keep && g.coin()) m.hide(i, j);
      }
    }
    TD p = masked_softmax(V(g.tensor<double>(r, c, 30.0)), m).value();
    for (std::size_t i = 0; i < r; ++i) {
      double s = 0;
      for (std::size_t j = 0; j < c; ++j) {
        s += p.at(i, j);
        if (!m.visible(i, j)) {
          EXPECT_EQ(p.at(i, j), 0.0);
        }
      }
      EXPECT_NEAR(s, 1.0, 1e-6);
    }
  }
}

TEST(MaskedSoftmax, StableForLargeLogits) {
  V x(TD::from_rows({{1000, 1001}}));
  TD p = masked_softmax(x, AttentionMask(1, 2)).value();
  EXPECT_TRUE(p.all_finite());
  EXPECT_NEAR(p[1], 1.0 / (1.0 + std::exp(-1.0)), 1e-12);
}

TEST(LayerNorm, ConstantRowCollapsesToBias) {
  V x(TD::from_rows({{5, 5, 5, 5}}));
  V gain(TD(Shape{4}, 1.0)), bias(TD(Shape{4}, 0.0));
  TD y = layer_norm(x, gain, bias, 1e-12).value();
  for (double v : y.data()) EXPECT_EQ(v, 0.0);
}

TEST(LayerNorm, NormalizedRowIsUnchanged) {
  V x(TD::from_rows({{1, -1}}));
  V gain(TD(Shape{2}, 1.0)), bias(TD(Shape{2}, 0.0));
  TD y = layer_norm(x, gain, bias, 1e-12).value();
  EXPECT_NEAR(y[0], 1.0, 1e-9);
  EXPECT_NEAR(y[1], -1.0, 1e-9);
}

TEST(LayerNorm, RandomRowsHaveZeroMeanUnitVariance) {
  Gen g(5);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t d = 2 + g.index(40);
    V x(g.tensor<double>(3, d, 10.0));
    V gain(TD(Shape{d}, 1.0)), bias(TD(Shape{d}, 0.0));
    TD y = layer_norm(x, gain, bias, 1e-12).value();
    for (std::size_t i = 0; i < 3; ++i) {
      double mean = 0, var = 0;
      for (std::size_t j = 0; j < d; ++j) mean += y.at(i, j);
      mean /= static_cast<double>(d);
      for (std::size_t j = 0; j < d; ++j) var += (y.at(i, j) - mean) * (y.at(i, j) - mean);
      var /= static_cast<double>(d);
      EXPECT_LT(std::abs(mean), 1e-6);
      EXPECT_NEAR(var, 1.0, 1e-4);
    }
  }
}

TEST(LayerNorm, RequiresPositiveEps) {
  V x(TD::from_rows({{1, 2}}));
  V gain(TD(Shape{2}, 1.0)), bias(TD(Shape{2}, 0.0));
  EXPECT_THROW(layer_norm(x, gain, bias, 0.0), ContractError);
}

TEST(Gelu, MatchesErfForm) {
  V x(TD::from_rows({{-2, -0.5, 0, 0.5, 2}}));
  TD y = gelu(x).value();
  for (std::size_t i = 0; i < 5; ++i) {
    const double v = x.value()[i];
    EXPECT_NEAR(y[i], 0.5 * v * (1.0 + std::erf(v / std::sqrt(2.0))), 1e-15);
  }
}

TEST(Embedding, OutOfRangeIdNamesIndex) {
  V table(TD::matrix(4, 2));
  const std::vector<int> ids{1, 7};
  try {
    embedding(table, std::span<const int>(ids), "token");
    FAIL() << "expected IndexError";
  } catch (const IndexError& e) {
    EXPECT_NE(std::string(e.what()).find('7'), std::string::npos);
  }
}

TEST(CrossEntropy, UniformLogitsGiveLogClasses) {
  V logits(TD::matrix(3, 4));
  const std::vector<int> targets{0, 2, 3};
  EXPECT_NEAR(cross_entropy(logits, std::span<const int>(targets)).value().item(), std::log(4.0),
              1e-12);
}

TEST(Ops, ForwardIsDeterministic) {
  Gen g(6);
  TD a = g.tensor<double>(4, 6), b = g.tensor<double>(6, 3);
  V va(a), vb(b);
  EXPECT_EQ(matmul(va, vb).value(), matmul(va, vb).value());
  EXPECT_EQ(masked_softmax(va, AttentionMask(4, 6)).value(),
            masked_softmax(va, AttentionMask(4, 6)).value());
}

TEST(Ops, ConcatAndSliceRoundTrip) {
  Gen g(7);
  V a(g.tensor<double>(3, 2)), b(g.tensor<double>(3, 5));
  V c = concat_cols(std::vector<V>{a, b});
  EXPECT_EQ(slice_cols(c, 0, 2).value(), a.value());
  EXPECT_EQ(slice_cols(c, 2, 5).value(), b.value());
  V r = concat_rows(std::vector<V>{a, a});
  const std::vector<std::size_t> rows{3, 4, 5};
  EXPECT_EQ(gather_rows(r, std::span<const std::size_t>(rows)).value(), a.value());
}

}  // namespace
}  // namespace flatdst
