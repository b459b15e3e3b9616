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

// Compiled with -mavx2 -mfma. Only reached through avx2_kernels() after a
// runtime CPU check.

#include <immintrin.h>

#include <algorithm>
#include <cmath>

#include "subflow/simd.hpp"

namespace subflow::simd {
namespace detail {
const KernelTable& avx2_table();
}

namespace {

inline float hsum(__m256 v) {
  __m128 lo = _mm256_castps256_ps128(v);
  __m128 hi = _mm256_extractf128_ps(v, 1);
  lo = _mm_add_ps(lo, hi);
  __m128 shuf = _mm_movehdup_ps(lo);
  __m128 sums = _mm_add_ps(lo, shuf);
  shuf = _mm_movehl_ps(shuf, sums);
  sums = _mm_add_ss(sums, shuf);
  return _mm_cvtss_f32(sums);
}

// Cephes-style expf, max relative error ~2 ulp on [-88, 88].
inline __m256 exp256(__m256 x) {
  const __m256 hi = _mm256_set1_ps(88.3762626647949f);
  const __m256 lo = _mm256_set1_ps(-88.3762626647949f);
  x = _mm256_min_ps(_mm256_max_ps(x, lo), hi);
  __m256 fx = _mm256_add_ps(_mm256_mul_ps(x, _mm256_set1_ps(1.44269504088896341f)),
                            _mm256_set1_ps(0.5f));
  fx = _mm256_floor_ps(fx);
  x = _mm256_sub_ps(x, _mm256_mul_ps(fx, _mm256_set1_ps(0.693359375f)));
  x = _mm256_sub_ps(x, _mm256_mul_ps(fx, _mm256_set1_ps(-2.12194440e-4f)));
  const __m256 z = _mm256_mul_ps(x, x);
  __m256 y = _mm256_set1_ps(1.9875691500e-4f);
  y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(1.3981999507e-3f));
  y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(8.3334519073e-3f));
  y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(4.1665795894e-2f));
  y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(1.6666665459e-1f));
  y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(5.0000001201e-1f));
  y = _mm256_fmadd_ps(y, z, x);
  y = _mm256_add_ps(y, _mm256_set1_ps(1.0f));
  __m256i e = _mm256_cvttps_epi32(fx);
  e = _mm256_add_epi32(e, _mm256_set1_epi32(0x7f));
  e = _mm256_slli_epi32(e, 23);
  return _mm256_mul_ps(y, _mm256_castsi256_ps(e));
}

float dot_avx2(const float* a, const float* b, std::size_t n) {
  __m256 acc0 = _mm256_setzero_ps();
  __m256 acc1 = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i), acc0);
    acc1 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i + 8), _mm256_loadu_ps(b + i + 8), acc1);
  }
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i), acc0);
  }
  float acc = hsum(_mm256_add_ps(acc0, acc1));
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void axpy_avx2(float alpha, const float* x, float* y, std::size_t n) {
  const __m256 va = _mm256_set1_ps(alpha);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    _mm256_storeu_ps(y + i, _mm256_fmadd_ps(va, _mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void composite_run_avx2(const SplatConic& s, int x0, int y, std::size_t n,
                        float* transmittance, float* weight) {
  const float dy = (static_cast<float>(y) + 0.5f) - s.mean_y;
  const __m256 vdy = _mm256_set1_ps(dy);
  const __m256 va = _mm256_set1_ps(s.conic_a);
  const __m256 vb = _mm256_set1_ps(s.conic_b);
  float cy = s.conic_c * dy;
  cy = cy * dy;
  const __m256 vcy = _mm256_set1_ps(cy);
  const __m256 vmx = _mm256_set1_ps(s.mean_x);
  const __m256 vop = _mm256_set1_ps(s.opacity);
  const __m256 cutoff = _mm256_set1_ps(kPowerCutoff);
  const __m256 amax = _mm256_set1_ps(kAlphaMax);
  const __m256 tmin = _mm256_set1_ps(kMinTransmittance);
  const __m256 one = _mm256_set1_ps(1.0f);
  const __m256 half = _mm256_set1_ps(-0.5f);
  const __m256 lane = _mm256_setr_ps(0.5f, 1.5f, 2.5f, 3.5f, 4.5f, 5.5f, 6.5f, 7.5f);

  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 px = _mm256_add_ps(
        _mm256_set1_ps(static_cast<float>(x0 + static_cast<int>(i))), lane);
    const __m256 dx = _mm256_sub_ps(px, vmx);
    __m256 quad = _mm256_mul_ps(_mm256_mul_ps(va, dx), dx);
    quad = _mm256_add_ps(quad, vcy);
    __m256 power = _mm256_mul_ps(half, quad);
    power = _mm256_sub_ps(power, _mm256_mul_ps(_mm256_mul_ps(vb, dx), vdy));
    const __m256 inside = _mm256_cmp_ps(power, cutoff, _CMP_GE_OQ);
    __m256 alpha = _mm256_min_ps(amax, _mm256_mul_ps(vop, exp256(power)));
    alpha = _mm256_and_ps(alpha, inside);
    const __m256 t = _mm256_loadu_ps(transmittance + i);
    const __m256 live = _mm256_cmp_ps(t, tmin, _CMP_GE_OQ);
    const __m256 w = _mm256_and_ps(_mm256_mul_ps(alpha, t), live);
    const __m256 t_next = _mm256_blendv_ps(t, _mm256_mul_ps(t, _mm256_sub_ps(one, alpha)), live);
    _mm256_storeu_ps(weight + i, w);
    _mm256_storeu_ps(transmittance + i, t_next);
  }
  if (i < n) {
    // Tail goes through the same vector path on a padded copy so every pixel
    // sees identical arithmetic.
    alignas(32) float t_buf[8];
    alignas(32) float w_buf[8];
    const std::size_t rest = n - i;
    for (std::size_t k = 0; k < 8; ++k) t_buf[k] = k < rest ? transmittance[i + k] : 0.0f;
    composite_run_avx2(s, x0 + static_cast<int>(i), y, 8, t_buf, w_buf);
    for (std::size_t k = 0; k < rest; ++k) {
      transmittance[i + k] = t_buf[k];
      weight[i + k] = w_buf[k];
    }
  }
}

}  // namespace

namespace detail {
const KernelTable& avx2_table() {
  static const KernelTable table{"avx2", dot_avx2, axpy_avx2, composite_run_avx2};
  return table;
}
}  // namespace detail

}  // namespace subflow::simd
