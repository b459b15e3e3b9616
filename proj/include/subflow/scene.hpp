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
#include <filesystem>
#include <string>
#include <vector>

#include "subflow/geometry.hpp"

namespace subflow {

struct GaussianPrimitive {
  std::array<float, 3> position{};
  // Unit quaternion (w, x, y, z).
  std::array<float, 4> rotation{1, 0, 0, 0};
  // Per-axis standard deviation.
  std::array<float, 3> scale{1, 1, 1};
  float opacity = 1.0f;
  std::array<float, 3> color{};
  std::vector<float> embedding;

  Mat3 rotation_matrix() const;
  Mat3 covariance() const;
  bool operator==(const GaussianPrimitive&) const = default;
};

struct GaussianScene {
  std::vector<GaussianPrimitive> gaussians;
  std::size_t embed_dim = 32;
  std::string source_tag;

  // Throws ValidationError naming the first offending Gaussian.
  void validate() const;
  std::size_t size() const { return gaussians.size(); }
};

struct Camera {
  std::array<double, 3> position{};
  // Camera-to-world rotation. Camera axes: x right, y down, z forward.
  std::array<double, 4> orientation{1, 0, 0, 0};
  double focal = 64.0;
  int width = 64;
  int height = 64;
  double near = 0.05;
  double far = 100.0;

  void validate() const;
  Mat3 world_to_camera() const;
  Vec3 to_camera(const Vec3& world) const;
  Vec3 to_world(const Vec3& cam) const;
  double cx() const { return 0.5 * width; }
  double cy() const { return 0.5 * height; }
};

// Same pose, different resolution; focal scales with width.
Camera resized(const Camera& cam, int width, int height);

enum class ToySceneKind { lattice, two_clusters, textured_slab };

std::string to_string(ToySceneKind kind);
ToySceneKind parse_toy_scene_kind(const std::string& text);

GaussianScene generate_toy_scene(ToySceneKind kind, std::size_t n, std::uint64_t seed, std::size_t embed_dim = 32);

struct RingOptions {
  double elevation_deg = 30.0;
  double focal = 64.0;
  int width = 64;
  int height = 64;
  double near = 0.05;
  double far = 100.0;
};

// Cameras evenly spaced in azimuth around a vertical axis through center,
// all looking at center. World up is +z.
std::vector<Camera> camera_ring(const Vec3& center, double radius, std::size_t count, const RingOptions& options = {});

// Index pairs (i, j) for consistency evaluation.
std::vector<std::pair<std::size_t, std::size_t>> short_range_pairs(std::size_t count);
std::vector<std::pair<std::size_t, std::size_t>> long_range_pairs(std::size_t count);

std::vector<std::uint8_t> encode_scene(const GaussianScene& scene);
GaussianScene decode_scene(const std::vector<std::uint8_t>& bytes, const std::string& label = "scene");
void save_scene(const GaussianScene& scene, const std::filesystem::path& path);
GaussianScene load_scene(const std::filesystem::path& path);

}  // namespace subflow
