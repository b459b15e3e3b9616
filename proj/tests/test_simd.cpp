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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "subflow/rng.hpp"
#include "subflow/simd.hpp"

using namespace subflow;

namespace {

std::vector<float> random_vector(std::size_t n, std::uint64_t seed) {
  CounterRng rng(seed, "simd-test");
  std::vector<float> v(n);
  for (auto& x : v) x = static_cast<float>(rng.uniform(-1.0, 1.0));
  return v;
}

std::vector<const simd::KernelTable*> variants() {
  std::vector<const simd::KernelTable*> out{&simd::scalar_kernels()};
  if (auto* t = simd::avx2_kernels()) out.push_back(t);
  return out;
}

}  // namespace

TEST_CASE("active kernel table is one of the compiled variants") {
  const auto& active = simd::active_kernels();
  bool found = false;
  for (auto* t : variants()) found = found || t == &active;
  CHECK(found);
  MESSAGE("active kernels: " << active.name);
}

TEST_CASE("dot and axpy agree with the scalar reference for every length") {
  const auto& ref = simd::scalar_kernels();
  for (auto* table : variants()) {
    for (std::size_t n : {0u, 1u, 7u, 8u, 9u, 15u, 16u, 17u, 33u, 100u, 1000u}) {
      const auto a = random_vector(n, 11 + n);
      const auto b = random_vector(n, 101 + n);
      const float expect = ref.dot(a.data(), b.data(), n);
      const float got = table->dot(a.data(), b.data(), n);
      CHECK(std::abs(got - expect) <= 1e-5f * (1.0f + static_cast<float>(n)));

      auto y_ref = random_vector(n, 7 + n);
      auto y_got = y_ref;
      ref.axpy(0.37f, a.data(), y_ref.data(), n);
      table->axpy(0.37f, a.data(), y_got.data(), n);
      for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(y_got[i] - y_ref[i]) <= 1e-6f);
    }
  }
}

TEST_CASE("composite_run variants match the scalar reference") {
  const auto& ref = simd::scalar_kernels();
  CounterRng rng(5, "splats");
  for (auto* table : variants()) {
    for (int trial = 0; trial < 200; ++trial) {
      simd::SplatConic s;
      s.mean_x = static_cast<float>(rng.uniform(-4, 40));
      s.mean_y = static_cast<float>(rng.uniform(-4, 40));
      const double sx = rng.uniform(0.5, 8), sy = rng.uniform(0.5, 8), rho = rng.uniform(-0.8, 0.8);
      const double a = sx * sx, c = sy * sy, b = rho * sx * sy, det = a * c - b * b;
      s.conic_a = static_cast<float>(c / det);
      s.conic_b = static_cast<float>(-b / det);
      s.conic_c = static_cast<float>(a / det);
      s.opacity = static_cast<float>(rng.uniform(0.05, 1.0));
      const std::size_t n = 1 + rng.below(37);
      const int x0 = static_cast<int>(rng.below(20));
      const int y = static_cast<int>(rng.below(36));
      std::vector<float> t_ref(n), t_got(n), w_ref(n), w_got(n);
      for (std::size_t i = 0; i < n; ++i) t_ref[i] = t_got[i] = static_cast<float>(rng.uniform(0.0, 1.0));
      t_ref[0] = t_got[0] = 5e-5f;  // already terminated pixel
      ref.composite_run(s, x0, y, n, t_ref.data(), w_ref.data());
      table->composite_run(s, x0, y, n, t_got.data(), w_got.data());
      for (std::size_t i = 0; i < n; ++i) {
        CHECK(std::abs(w_got[i] - w_ref[i]) <= 1e-6f);
        CHECK(std::abs(t_got[i] - t_ref[i]) <= 1e-6f);
      }
      CHECK(w_got[0] == 0.0f);
      CHECK(t_got[0] == 5e-5f);
    }
  }
}

TEST_CASE("composite_run clamps alpha at 0.99 and truncates beyond 3 sigma") {
  simd::SplatConic s{10.5f, 10.5f, 1.0f, 0.0f, 1.0f, 1.0f};
  for (auto* table : variants()) {
    std::vector<float> t(16, 1.0f), w(16);
    table->composite_run(s, 0, 10, 16, t.data(), w.data());
    CHECK(w[10] == doctest::Approx(0.99f));
    CHECK(t[10] == doctest::Approx(0.01f));
    // dx = 4 -> power -8 < -4.5
    CHECK(w[14] == 0.0f);
    CHECK(t[14] == 1.0f);
    // dx = 3 -> power -4.5, still inside
    CHECK(w[13] == doctest::Approx(std::exp(-4.5f)).epsilon(1e-5));
  }
}

TEST_CASE("counter rng is reproducible and stream separated") {
  CounterRng a(42, "x"), b(42, "x"), c(42, "y");
  for (int i = 0; i < 10; ++i) {
    const auto va = a.next_u64();
    CHECK(va == b.next_u64());
    CHECK(va != c.next_u64());
  }
  CounterRng n(1, "normal");
  double s = 0, s2 = 0;
  const int m = 20000;
  for (int i = 0; i < m; ++i) {
    const double v = n.normal();
    s += v;
    s2 += v * v;
  }
  CHECK(std::abs(s / m) < 5.0 / std::sqrt(m));
  CHECK(std::abs(s2 / m - 1.0) < 0.05);
}
