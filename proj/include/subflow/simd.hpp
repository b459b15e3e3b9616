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

#include <cstddef>

namespace subflow::simd {

// Screen-space Gaussian in conic (inverse covariance) form.
struct SplatConic {
  float mean_x = 0.0f;
  float mean_y = 0.0f;
  float conic_a = 0.0f;  // inv_cov[0][0]
  float conic_b = 0.0f;  // inv_cov[0][1]
  float conic_c = 0.0f;  // inv_cov[1][1]
  float opacity = 0.0f;
};

// Compositing constants shared by every kernel variant and the reference
// renderer.
inline constexpr float kAlphaMax = 0.99f;
inline constexpr float kMinTransmittance = 1e-4f;
// Contributions beyond 3 sigma (Mahalanobis) are exactly zero.
inline constexpr float kPowerCutoff = -4.5f;

// One instruction-set variant of every hot inner loop. All variants must agree
// with the scalar table up to floating-point reassociation.
struct KernelTable {
  const char* name;

  float (*dot)(const float* a, const float* b, std::size_t n);

  // y += alpha * x
  void (*axpy)(float alpha, const float* x, float* y, std::size_t n);

  // Front-to-back compositing of one splat over pixels (x0 + i, y), i < n.
  // For each pixel still above kMinTransmittance: weight[i] = alpha * T and
  // T *= (1 - alpha); otherwise weight[i] = 0 and T is untouched.
  void (*composite_run)(const SplatConic& splat, int x0, int y, std::size_t n,
                        float* transmittance, float* weight);
};

const KernelTable& scalar_kernels();

// Null when the binary was built without AVX2 support or the CPU lacks
// AVX2+FMA.
const KernelTable* avx2_kernels();

// Best available table. SUBFLOW_SIMD=scalar forces the scalar reference.
const KernelTable& active_kernels();

}  // namespace subflow::simd
