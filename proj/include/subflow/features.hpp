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
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "subflow/tensor.hpp"

namespace subflow {

enum class FeatureDomain { clip_like, vgg_like, clip_mapped };
enum class Provenance { pseudo_encoder, synthetic_pair, imported };

std::string to_string(FeatureDomain d);
std::string to_string(Provenance p);

// M row vectors of a common dimension.
struct FeatureSet {
  FeatureDomain domain = FeatureDomain::clip_like;
  std::size_t dim = 0;
  std::vector<float> vectors;
  Provenance provenance = Provenance::pseudo_encoder;

  FeatureSet() = default;
  FeatureSet(FeatureDomain d, std::size_t dimension, Provenance p = Provenance::pseudo_encoder)
      : domain(d), dim(dimension), provenance(p) {}

  std::size_t count() const { return dim == 0 ? 0 : vectors.size() / dim; }
  std::span<const float> row(std::size_t i) const { return {vectors.data() + i * dim, dim}; }
  std::span<float> row(std::size_t i) { return {vectors.data() + i * dim, dim}; }
  void append(std::span<const float> v);
  void validate() const;
  Tensor to_tensor() const;
  static FeatureSet from_tensor(const Tensor& t, FeatureDomain d, Provenance p);
};

// FEAT: magic, u32 version=1, u32 M, u32 dim, u8 domain (0 clip, 1 vgg, 2 clip_mapped), f32 rows.
std::vector<std::uint8_t> encode_features(const FeatureSet& f);
FeatureSet decode_features(const std::vector<std::uint8_t>& bytes, const std::string& label = "features");
void export_features(const FeatureSet& f, const std::filesystem::path& path);
FeatureSet import_features(const std::filesystem::path& path);

struct GaussianComponent {
  double weight = 1.0;
  std::vector<double> mean;
  // Row-major dim x dim, symmetric positive definite.
  std::vector<double> covariance;
};

struct GaussianMixture {
  std::vector<GaussianComponent> components;

  std::size_t dim() const { return components.empty() ? 0 : components.front().mean.size(); }
  void validate(const std::string& what) const;
};

enum class Pairing { index, nearest };

struct PairedDistributionSpec {
  GaussianMixture clip_side;
  GaussianMixture vgg_side;
  Pairing pairing = Pairing::index;
  std::uint64_t seed = 0;
};

struct PairedSample {
  FeatureSet clip;
  FeatureSet vgg;
  // Mixture component of each clip-side row.
  std::vector<std::size_t> labels;
};

// Index pairing draws one standard-normal latent per row and pushes it
// through the Cholesky factor of each side's component, so paired rows share
// their latent. Nearest pairing draws the sides independently and pairs
// them by rank along the first coordinate.
PairedSample sample_paired(const PairedDistributionSpec& spec, std::size_t m);

// Cholesky factor (lower, row-major) of an SPD matrix.
std::vector<double> cholesky(const std::vector<double>& a, std::size_t n);

}  // namespace subflow
