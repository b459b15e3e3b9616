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
#include <span>
#include <vector>

#include "subflow/encoders.hpp"
#include "subflow/features.hpp"
#include "subflow/nn.hpp"
#include "subflow/rasterizer.hpp"
#include "subflow/scene.hpp"

namespace subflow {

inline constexpr float kEpsilonStd = 1e-6f;

struct StyleStats {
  std::vector<float> mu;
  std::vector<float> sigma;

  std::size_t dim() const { return mu.size(); }
  void validate() const;
};

// Population statistics over the rows of an N x D matrix.
StyleStats population_stats(std::span<const float> rows, std::size_t n, std::size_t d);
StyleStats stats_from_feature(const FeatureSet& f);
// First half is mu, second half goes through softplus to give sigma.
StyleStats stats_from_vector(std::span<const float> v);

struct AdainResult {
  std::vector<float> values;  // N x D
  // Set when some content channel had zero spread and was floored.
  bool degenerate = false;
};

AdainResult adain(std::span<const float> embeddings, std::size_t n, const StyleStats& style);

// AdaIN over the spatial positions of a [1, C, H, W] map.
Tensor adain_map(const Tensor& features, const StyleStats& style);

// Per-Gaussian colour decoder, D -> hidden -> hidden -> 3, sigmoid output.
class ColorDecoder {
 public:
  ColorDecoder() = default;
  ColorDecoder(std::size_t dim, std::size_t hidden, std::uint64_t seed);

  Tensor forward(const Tensor& embeddings) const { return net_.forward(embeddings); }
  std::vector<float> decode(std::span<const float> embeddings) const;
  std::vector<Tensor> parameters() const { return net_.parameters(); }
  std::size_t dim() const { return net_.input_width(); }
  std::size_t hidden() const { return net_.spec().layer_widths[1]; }
  // Copies share parameter storage; clone does not.
  ColorDecoder clone() const;

 private:
  DenseNet<float> net_;
};

// Splats per-Gaussian attributes [N, C] through fixed weights into [1, C, H, W].
Tensor splat_attributes(const PixelWeights& w, const Tensor& attributes);

struct DistillConfig {
  std::size_t steps = 1000;
  float learning_rate = 5e-3f;
  float projection_weight = 1.0f;
  int image_size = 32;
  std::size_t hidden_width = 64;
  std::uint64_t seed = 1;
};

struct DistillResult {
  GaussianScene scene;
  ColorDecoder decoder;
  std::vector<float> reconstruction_losses;
  std::vector<float> projection_losses;
};

// Jointly fits per-Gaussian embeddings and the colour decoder: embeddings
// decode back to the Gaussian colours, and rendered embedding maps track the
// encoder's transfer-tap features of the rendered colours.
DistillResult distill_embeddings(const GaussianScene& scene, const std::vector<Camera>& cams, const VggEncoder& encoder,
                                 const DistillConfig& cfg = {});

double reconstruction_error(const GaussianScene& scene, const ColorDecoder& decoder);
bool is_distilled(const GaussianScene& scene);

// Colours become decode(adain(embeddings)); everything else is copied.
GaussianScene stylize_scene(const GaussianScene& scene, const StyleStats& style, const ColorDecoder& decoder,
                            bool* degenerate = nullptr);

}  // namespace subflow
