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

#include <cstdint>

#include "subflow/features.hpp"
#include "subflow/rng.hpp"

namespace subflow::testing {

// Three overlapping diagonal components on the clip side, one Gaussian on
// the vgg side. Paired rows share their latent.
inline PairedSample mixture_to_gaussian(std::uint64_t seed, std::size_t m, std::size_t d = 8) {
  PairedDistributionSpec spec;
  CounterRng rng(7, "probe");
  for (int k = 0; k < 3; ++k) {
    GaussianComponent c;
    c.weight = 1.0 / 3.0;
    c.mean.resize(d);
    c.covariance.assign(d * d, 0.0);
    for (std::size_t j = 0; j < d; ++j) {
      c.mean[j] = 0.3 * rng.normal();
      c.covariance[j * d + j] = 0.2 + 1.8 * rng.uniform();
    }
    spec.clip_side.components.push_back(c);
  }
  GaussianComponent g;
  g.mean.assign(d, 2.0);
  g.covariance.assign(d * d, 0.0);
  for (std::size_t j = 0; j < d; ++j) g.covariance[j * d + j] = 0.5 + 0.1 * static_cast<double>(j);
  spec.vgg_side.components.push_back(g);
  spec.pairing = Pairing::index;
  spec.seed = seed;
  return sample_paired(spec, m);
}

// 1D point cloud as a FeatureSet.
inline FeatureSet line_set(const std::vector<float>& xs, FeatureDomain domain) {
  FeatureSet f(domain, 1);
  f.vectors = xs;
  return f;
}

}  // namespace subflow::testing
