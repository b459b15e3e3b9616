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

#include <algorithm>
#include <cmath>

#include "subflow/simd.hpp"

namespace subflow::simd {
namespace {

float dot_scalar(const float* a, const float* b, std::size_t n) {
  float acc = 0.0f;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void axpy_scalar(float alpha, const float* x, float* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void composite_run_scalar(const SplatConic& s, int x0, int y, std::size_t n,
                          float* transmittance, float* weight) {
  const float dy = (static_cast<float>(y) + 0.5f) - s.mean_y;
  for (std::size_t i = 0; i < n; ++i) {
    const float dx = (static_cast<float>(x0 + static_cast<int>(i)) + 0.5f) - s.mean_x;
    // The evaluation order here is mirrored lane-for-lane by the SIMD kernels.
    float quad = s.conic_a * dx;
    quad = quad * dx;
    float cy = s.conic_c * dy;
    cy = cy * dy;
    quad = quad + cy;
    float power = -0.5f * quad;
    float cross = s.conic_b * dx;
    cross = cross * dy;
    power = power - cross;
    float alpha = 0.0f;
    if (power >= kPowerCutoff) alpha = std::min(kAlphaMax, s.opacity * std::exp(power));
    const float t = transmittance[i];
    if (t >= kMinTransmittance) {
      weight[i] = alpha * t;
      transmittance[i] = t * (1.0f - alpha);
    } else {
      weight[i] = 0.0f;
    }
  }
}

}  // namespace

const KernelTable& scalar_kernels() {
  static const KernelTable table{"scalar", dot_scalar, axpy_scalar, composite_run_scalar};
  return table;
}

}  // namespace subflow::simd
