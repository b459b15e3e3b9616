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

#include "subflow/textures.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace subflow {

namespace {

float jitter(float v, CounterRng& rng, double amount) {
  return static_cast<float>(std::clamp(v + amount * rng.uniform(-1, 1), 0.0, 1.0));
}

}  // namespace

TextureParams random_texture(CounterRng& rng) {
  TextureParams p;
  for (int c = 0; c < 3; ++c) {
    p.color_a[c] = static_cast<float>(rng.uniform());
    p.color_b[c] = static_cast<float>(rng.uniform());
  }
  p.pattern = static_cast<Pattern>(rng.below(4));
  p.frequency = rng.uniform(1.5, 6.0);
  p.angle = rng.uniform(0.0, std::numbers::pi);
  p.phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  p.noise = rng.uniform(0.0, 0.1);
  p.noise_seed = rng.next_u64();
  return p;
}

TextureParams perturb_texture(const TextureParams& p, CounterRng& rng, double amount) {
  TextureParams q = p;
  for (int c = 0; c < 3; ++c) {
    q.color_a[c] = jitter(p.color_a[c], rng, 0.1 * amount);
    q.color_b[c] = jitter(p.color_b[c], rng, 0.1 * amount);
  }
  q.phase = p.phase + amount * rng.uniform(-1, 1);
  q.angle = p.angle + 0.2 * amount * rng.uniform(-1, 1);
  q.frequency = p.frequency * (1.0 + 0.1 * amount * rng.uniform(-1, 1));
  q.noise_seed = rng.next_u64();
  return q;
}

Image render_texture(const TextureParams& p, int size) {
  Image img(size, size, 3);
  CounterRng noise(p.noise_seed, "texture-noise");
  const double ca = std::cos(p.angle), sa = std::sin(p.angle);
  const double two_pi = 2.0 * std::numbers::pi;
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double u = (x + 0.5) / size - 0.5, v = (y + 0.5) / size - 0.5;
      const double ru = ca * u - sa * v, rv = sa * u + ca * v;
      double t = 0.0;
      switch (p.pattern) {
        case Pattern::stripes:
          t = 0.5 + 0.5 * std::sin(two_pi * p.frequency * ru + p.phase);
          break;
        case Pattern::checker:
          t = 0.5 + 0.5 * std::sin(two_pi * p.frequency * ru + p.phase) * std::sin(two_pi * p.frequency * rv);
          break;
        case Pattern::rings:
          t = 0.5 + 0.5 * std::cos(two_pi * p.frequency * std::sqrt(u * u + v * v) + p.phase);
          break;
        case Pattern::blobs:
          t = 0.5 + 0.25 * (std::sin(two_pi * p.frequency * ru + p.phase) +
                            std::cos(two_pi * 0.7 * p.frequency * rv - 0.5 * p.phase));
          break;
      }
      for (int c = 0; c < 3; ++c) {
        const double value = (1.0 - t) * p.color_a[c] + t * p.color_b[c] + p.noise * noise.uniform(-1, 1);
        img.at(x, y, c) = static_cast<float>(std::clamp(value, 0.0, 1.0));
      }
    }
  }
  return img;
}

std::vector<Image> texture_corpus(std::size_t count, int size, std::uint64_t seed) {
  std::vector<Image> out;
  out.reserve(count);
  CounterRng rng(seed, "texture-corpus");
  for (std::size_t i = 0; i < count; ++i) out.push_back(render_texture(random_texture(rng), size));
  return out;
}

}  // namespace subflow
