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

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "subflow/image.hpp"
#include "subflow/rng.hpp"

namespace subflow {

enum class Pattern { stripes, checker, rings, blobs };

struct TextureParams {
  std::array<float, 3> color_a{};
  std::array<float, 3> color_b{};
  Pattern pattern = Pattern::stripes;
  double frequency = 3.0;  // cycles across the image
  double angle = 0.0;
  double phase = 0.0;
  double noise = 0.05;
  std::uint64_t noise_seed = 0;
};

TextureParams random_texture(CounterRng& rng);
// Small jitter of colours, phase and noise; amount in [0, 1].
TextureParams perturb_texture(const TextureParams& p, CounterRng& rng, double amount);
Image render_texture(const TextureParams& p, int size);
std::vector<Image> texture_corpus(std::size_t count, int size, std::uint64_t seed);

}  // namespace subflow
