// Copyright 2026 The subflow Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "subflow/error.hpp"
#include "subflow/nn.hpp"
#include "subflow/tensor.hpp"

namespace subflow {

/// Max over every parameter entry of |analytic - numeric| / max(|numeric|, |analytic|, floor),
/// numeric from central differences with step h. Run it in double precision:
/// float32 central differences are too noisy for a 1e-3 bound.
template <class Real>
double finite_diff_check(const std::vector<BasicTensor<Real>>& params,
                         const std::function<BasicTensor<Real>()>& loss_fn, double h) {
  if (!(h > 0)) throw ValidationError("finite_diff_check: step h must be > 0");
  zero_grads(params);
  backward(loss_fn());
  // Entries far below the gradient's overall scale are dominated by O(h^2)
  // truncation, so the denominator is floored at a fraction of that scale.
  double scale_floor = 0.0;
  for (const auto& p : params)
    for (Real g : p.grad()) scale_floor = std::max(scale_floor, std::abs(static_cast<double>(g)));
  scale_floor = std::max(scale_floor * 1e-3, 1e-12);
  double worst = 0.0;
  for (auto p : params) {
    const std::vector<Real> analytic(p.grad().begin(), p.grad().end());
    auto values = p.mutable_data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const Real saved = values[i];
      values[i] = saved + static_cast<Real>(h);
      const double up = loss_fn().item();
      values[i] = saved - static_cast<Real>(h);
      const double down = loss_fn().item();
      values[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic.empty() ? 0.0 : static_cast<double>(analytic[i]);
      const double denom = std::max({std::abs(numeric), std::abs(a), scale_floor});
      worst = std::max(worst, std::abs(a - numeric) / denom);
    }
  }
  return worst;
}

// Dense-net convenience form; the probe loss is 0.5 * sum(net(input)^2).
template <class Real>
double finite_diff_check(const DenseNet<Real>& net, const BasicTensor<Real>& input, double h) {
  return finite_diff_check<Real>(
      net.parameters(), [&] { return scale(sum(square(net.forward(input))), Real(0.5)); }, h);
}

}  // namespace subflow
