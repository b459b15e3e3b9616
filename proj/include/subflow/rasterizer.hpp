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
#include <memory>
#include <optional>
#include <vector>

#include "subflow/image.hpp"
#include "subflow/scene.hpp"
#include "subflow/simd.hpp"
#include "subflow/tensor.hpp"

namespace subflow {

inline constexpr int kTileSize = 16;
inline constexpr double kLowPass = 0.3;

struct Splat2D {
  std::array<double, 2> mean2d{};
  // Symmetric 2x2 as (xx, xy, yy), low-pass term included.
  std::array<double, 3> cov2d{};
  double view_depth = 0.0;
  std::size_t source_index = 0;
};

std::optional<Splat2D> project_gaussian(const GaussianPrimitive& g, const Camera& cam, std::size_t index = 0);

// Per-pixel compositing weights: row p of `weights` holds alpha_i * T_i for
// every splat that touched pixel p, columns index scene Gaussians. Any
// per-Gaussian attribute renders as weights x attributes.
struct PixelWeights {
  int width = 0;
  int height = 0;
  std::shared_ptr<SparseRows> weights;
  std::vector<float> depth;
  std::vector<float> alpha;
};

struct RenderOutput {
  Image rgb;
  Image features;
  Image depth;
  Image alpha_mask;
};

struct RenderOptions {
  bool features = true;
  // Use this kernel table instead of the runtime-selected one.
  const simd::KernelTable* kernels = nullptr;
};

PixelWeights pixel_weights(const GaussianScene& scene, const Camera& cam, const RenderOptions& options = {});
// Brute force: every pixel visits every splat, no tiles, scalar kernels.
PixelWeights pixel_weights_reference(const GaussianScene& scene, const Camera& cam);

// attributes is N x channels, row-major.
Image composite_attributes(const PixelWeights& w, const std::vector<float>& attributes, int channels);

std::vector<float> color_matrix(const GaussianScene& scene);
std::vector<float> embedding_matrix(const GaussianScene& scene);

RenderOutput resolve_render(const PixelWeights& w, const GaussianScene& scene, bool features = true);
RenderOutput render(const GaussianScene& scene, const Camera& cam, const RenderOptions& options = {});
RenderOutput render_reference(const GaussianScene& scene, const Camera& cam);

struct WarpMap {
  int width = 0;
  int height = 0;
  // Destination pixel-index coordinates (pixel centers are integers).
  std::vector<float> x;
  std::vector<float> y;
  std::vector<std::uint8_t> valid;

  std::size_t valid_count() const;
};

inline constexpr double kOcclusionTolerance = 0.02;

// Reprojects src pixels through depth_src into dst. With depth_dst, pixels
// whose reprojected depth disagrees by more than 2% are marked occluded.
WarpMap warp_map(const Camera& src, const Camera& dst, const Image& depth_src, const Image* depth_dst = nullptr);

}  // namespace subflow
