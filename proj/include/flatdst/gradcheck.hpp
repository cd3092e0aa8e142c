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

#ifndef FLATDST_GRADCHECK_HPP_
#define FLATDST_GRADCHECK_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "flatdst/autograd.hpp"
#include "flatdst/error.hpp"

namespace flatdst {

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t coordinates_checked = 0;
  std::size_t parameters_checked = 0;
};

struct GradCheckOptions {
  double eps = 1e-5;
  // Parameters with more elements than this are checked on a random sample.
  std::size_t max_coords_per_param = 24;
  std::uint64_t sample_seed = 7;
};

// Compares backward() against central differences
// (f(p + eps) - f(p - eps)) / 2 eps on every trainable parameter. Relative
// error uses the denominator max(|analytic|, |numeric|, 1e-8).
inline GradCheckReport grad_check(const std::function<Var<double>()>& loss_fn,
                                  const std::vector<Parameter<double>>& params,
                                  const GradCheckOptions& options = {}) {
  if (!(options.eps >= 1e-6 && options.eps <= 1e-4)) {
    throw ContractError("grad_check eps must lie in [1e-6, 1e-4], got " +
                        std::to_string(options.eps));
  }
  auto evaluate = [&loss_fn] {
    NoGradGuard guard;
    return loss_fn().value().item();
  };
  const double first = evaluate();
  const double second = evaluate();
  if (first != second) {
    throw DeterminismError("loss closure is not deterministic: " +
                           std::to_string(first) + " then " +
                           std::to_string(second));
  }

  for (const auto& p : params) {
    if (p.trainable) Var<double>(p.var).zero_grad();
  }
  backward(loss_fn());

  GradCheckReport report;
  std::mt19937_64 rng(options.sample_seed);
  for (const auto& p : params) {
    if (!p.trainable) continue;
    Var<double> var = p.var;
    const Tensor<double> analytic = var.grad();
    const std::size_t n = var.value().size();
    std::vector<std::size_t> coords(n);
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (n > options.max_coords_per_param) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(options.max_coords_per_param);
      std::sort(coords.begin(), coords.end());
    }
    for (std::size_t c : coords) {
      double& slot = var.mutable_value()[c];
      const double saved = slot;
      slot = saved + options.eps;
      const double up = evaluate();
      slot = saved - options.eps;
      const double down = evaluate();
      slot = saved;
      const double numeric = (up - down) / (2.0 * options.eps);
      const double a = analytic[c];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
      const double rel = std::abs(a - numeric) / denom;
      if (report.coordinates_checked == 0 || rel > report.max_relative_error) {
        report.max_relative_error = rel;
        report.worst_parameter = p.name;
        report.worst_index = c;
        report.worst_analytic = a;
        report.worst_numeric = numeric;
      }
      ++report.coordinates_checked;
    }
    ++report.parameters_checked;
  }
  return report;
}

}  // namespace flatdst

#endif  // FLATDST_GRADCHECK_HPP_
