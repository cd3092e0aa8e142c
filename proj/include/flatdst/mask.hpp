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

#ifndef FLATDST_MASK_HPP_
#define FLATDST_MASK_HPP_

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "flatdst/error.hpp"

namespace flatdst {

// Additive value standing in for -inf. exp() of it underflows to exactly 0
// in both float and double, and it never produces NaN through 0 * inf.
inline constexpr double kMaskedOut = -1e9;

// Additive attention mask with entries in {0, -inf}: entry (i, j) == 0 lets
// query i attend to key j. Every row keeps at least one visible column.
class AttentionMask {
 public:
  AttentionMask() = default;

  // All-visible rows x cols mask.
  AttentionMask(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), visible_(rows * cols, 1) {
    if (rows > 0 && cols == 0) {
      throw InvalidMaskError("attention mask with rows but no columns");
    }
  }

  // Accepts 0 for visible and kMaskedOut or -inf for hidden.
  static AttentionMask from_entries(std::size_t rows, std::size_t cols,
                                    const std::vector<double>& entries) {
    if (entries.size() != rows * cols) {
      throw DimensionError("mask entries " + std::to_string(entries.size()) +
                           " for shape " + shape_string({rows, cols}));
    }
    AttentionMask m(rows, cols);
    for (std::size_t i = 0; i < entries.size(); ++i) {
      const double e = entries[i];
      if (e == 0.0) continue;
      if (e == kMaskedOut || (std::isinf(e) && e < 0)) {
        m.visible_[i] = 0;
      } else {
        throw InvalidMaskError("mask entry " + std::to_string(e) +
                               " is neither 0 nor -inf");
      }
    }
    m.validate();
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool visible(std::size_t i, std::size_t j) const {
    return visible_[i * cols_ + j] != 0;
  }
  double entry(std::size_t i, std::size_t j) const {
    return visible(i, j) ? 0.0 : kMaskedOut;
  }
  void hide(std::size_t i, std::size_t j) { visible_[i * cols_ + j] = 0; }

  std::size_t masked_count() const {
    std::size_t n = 0;
    for (auto v : visible_) n += v == 0;
    return n;
  }
  bool all_visible() const { return masked_count() == 0; }

  void validate() const {
    for (std::size_t i = 0; i < rows_; ++i) {
      bool any = false;
      for (std::size_t j = 0; j < cols_ && !any; ++j) any = visible(i, j);
      if (!any) {
        throw InvalidMaskError("attention mask row " + std::to_string(i) +
                               " is fully masked");
      }
    }
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::uint8_t> visible_;
};

// Bidirectional visibility: every position sees every position.
inline AttentionMask build_encoder_mask(std::size_t n) {
  if (n == 0) throw ContractError("encoder mask needs n >= 1");
  return AttentionMask(n, n);
}

// Left-to-right visibility with a prepended block of reused encoder states.
// Columns [0, reuse_len) are always visible; decoder column reuse_len + j is
// visible to decoder row i iff j <= i.
inline AttentionMask build_decoder_mask(std::size_t reuse_len,
                                        std::size_t dec_len) {
  if (dec_len == 0) throw ContractError("decoder mask needs dec_len >= 1");
  AttentionMask m(dec_len, reuse_len + dec_len);
  for (std::size_t i = 0; i < dec_len; ++i) {
    for (std::size_t j = i + 1; j < dec_len; ++j) m.hide(i, reuse_len + j);
  }
  return m;
}

}  // namespace flatdst

#endif  // FLATDST_MASK_HPP_
