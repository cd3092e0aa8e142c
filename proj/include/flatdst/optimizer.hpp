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

#ifndef FLATDST_OPTIMIZER_HPP_
#define FLATDST_OPTIMIZER_HPP_

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "flatdst/autograd.hpp"
#include "flatdst/error.hpp"

namespace flatdst {

// Linear warmup from 0 to `peak` over ceil(warmup_proportion * total)
// steps, then linear decay to 0 at `total`.
class WarmupLinearSchedule {
 public:
  WarmupLinearSchedule(double peak, double warmup_proportion, std::size_t total_steps)
      : peak_(peak), total_(total_steps) {
    if (!(peak > 0)) throw ContractError("learning rate must be > 0");
    if (warmup_proportion < 0 || warmup_proportion > 1) {
      throw ContractError("warmup_proportion must lie in [0, 1]");
    }
    warmup_ = static_cast<std::size_t>(std::ceil(warmup_proportion * static_cast<double>(total_)));
  }

  std::size_t warmup_steps() const { return warmup_; }
  std::size_t total_steps() const { return total_; }

  double at(std::size_t step) const {
    if (step < warmup_) {
      return peak_ * static_cast<double>(step) / static_cast<double>(warmup_);
    }
    if (total_ <= warmup_) return peak_;
    const double remaining = static_cast<double>(total_ - std::min(step, total_));
    return peak_ * remaining / static_cast<double>(total_ - warmup_);
  }

 private:
  double peak_;
  std::size_t total_;
  std::size_t warmup_ = 0;
};

// One Adam instance over every trainable parameter of a model.
template <Real T>
class Adam {
 public:
  Adam(const ParameterSet<T>& params, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (const auto& p : params) {
      if (!p.trainable) continue;
      params_.push_back(p);
      m_.emplace_back(p.var.value().size(), 0.0);
      v_.emplace_back(p.var.value().size(), 0.0);
    }
  }

  std::size_t group_count() const { return 1; }
  std::size_t parameter_count() const { return params_.size(); }
  const std::vector<Parameter<T>>& parameters() const { return params_; }
  std::size_t steps() const { return t_; }

  double grad_norm() const {
    double sq = 0;
    for (const auto& p : params_) {
      for (T g : p.var.grad().data()) sq += static_cast<double>(g) * static_cast<double>(g);
    }
    return std::sqrt(sq);
  }

  // Rescales gradients so their global L2 norm is at most max_norm. Returns
  // the norm before clipping.
  double clip_grad_norm(double max_norm) {
    const double norm = grad_norm();
    if (norm > max_norm && norm > 0) {
      const T factor = static_cast<T>(max_norm / norm);
      for (auto& p : params_) {
        for (auto& g : Var<T>(p.var).mutable_grad().data()) g *= factor;
      }
    }
    return norm;
  }

  void step(double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t k = 0; k < params_.size(); ++k) {
      Var<T> var = params_[k].var;
      auto w = var.mutable_value().data();
      const auto g = var.grad().data();
      auto& m = m_[k];
      auto& v = v_[k];
      for (std::size_t i = 0; i < w.size(); ++i) {
        const double gi = static_cast<double>(g[i]);
        m[i] = beta1_ * m[i] + (1.0 - beta1_) * gi;
        v[i] = beta2_ * v[i] + (1.0 - beta2_) * gi * gi;
        const double update = lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps_);
        w[i] = static_cast<T>(static_cast<double>(w[i]) - update);
      }
    }
  }

  void zero_grad() {
    for (auto& p : params_) Var<T>(p.var).zero_grad();
  }

 private:
  double beta1_, beta2_, eps_;
  std::vector<Parameter<T>> params_;
  std::vector<std::vector<double>> m_, v_;
  std::size_t t_ = 0;
};

}  // namespace flatdst

#endif  // FLATDST_OPTIMIZER_HPP_
