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

#include "subflow/scene.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "subflow/binary_io.hpp"
#include "subflow/error.hpp"
#include "subflow/rng.hpp"

namespace subflow {

namespace {

constexpr std::uint32_t kSceneVersion = 1;

std::array<float, 4> to_float_quat(const std::array<double, 4>& q) {
  return {static_cast<float>(q[0]), static_cast<float>(q[1]), static_cast<float>(q[2]), static_cast<float>(q[3])};
}

std::array<float, 4> random_rotation(CounterRng& rng) {
  std::array<double, 4> q{rng.normal(), rng.normal(), rng.normal(), rng.normal()};
  double n = 0.0;
  for (double v : q) n += v * v;
  n = std::sqrt(n);
  for (auto& v : q) v /= n;
  return to_float_quat(q);
}

float clamp01(double v) { return static_cast<float>(std::clamp(v, 0.0, 1.0)); }

GaussianScene make_lattice(std::size_t n, CounterRng& rng) {
  GaussianScene scene;
  const auto side = static_cast<std::size_t>(std::ceil(std::cbrt(static_cast<double>(n)) - 1e-9));
  const double spacing = 1.0;
  const double offset = 0.5 * spacing * static_cast<double>(side - 1);
  const double denom = side > 1 ? static_cast<double>(side - 1) : 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t ix = i % side, iy = (i / side) % side, iz = i / (side * side);
    GaussianPrimitive g;
    g.position = {static_cast<float>(ix * spacing - offset), static_cast<float>(iy * spacing - offset),
                  static_cast<float>(iz * spacing - offset)};
    const float s = static_cast<float>(0.35 * spacing);
    g.scale = {s, s, s};
    g.opacity = 0.9f;
    g.color = {clamp01(0.8 * ix / denom + 0.2 * rng.uniform()), clamp01(0.8 * iy / denom + 0.2 * rng.uniform()),
               clamp01(0.8 * iz / denom + 0.2 * rng.uniform())};
    scene.gaussians.push_back(std::move(g));
  }
  return scene;
}

GaussianScene make_two_clusters(std::size_t n, CounterRng& rng) {
  GaussianScene scene;
  constexpr double kCenter = 3.0;
  constexpr double kStd = 0.3;
  const std::array<std::array<double, 3>, 2> tints{{{1.0, 0.2, 0.0}, {0.0, 0.8, 1.0}}};
  for (std::size_t i = 0; i < n; ++i) {
    const int cluster = i < (n + 1) / 2 ? 0 : 1;
    const double cx = cluster == 0 ? -kCenter : kCenter;
    GaussianPrimitive g;
    g.position = {static_cast<float>(cx + kStd * rng.normal()), static_cast<float>(kStd * rng.normal()),
                  static_cast<float>(kStd * rng.normal())};
    g.rotation = random_rotation(rng);
    for (auto& s : g.scale) s = static_cast<float>(0.08 + 0.1 * rng.uniform());
    g.opacity = static_cast<float>(0.6 + 0.35 * rng.uniform());
    for (int c = 0; c < 3; ++c) g.color[c] = clamp01(0.5 * tints[cluster][c] + 0.5 * rng.uniform());
    scene.gaussians.push_back(std::move(g));
  }
  return scene;
}

GaussianScene make_textured_slab(std::size_t n, CounterRng& rng) {
  GaussianScene scene;
  constexpr double kHalfExtent = 2.0;
  const auto side = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n)) - 1e-9));
  const double spacing = 2.0 * kHalfExtent / static_cast<double>(side);
  const double phase = 2.0 * std::numbers::pi * rng.uniform();
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t ix = i % side, iy = i / side;
    const double x = -kHalfExtent + (ix + 0.5) * spacing;
    const double y = -kHalfExtent + (iy + 0.5) * spacing;
    GaussianPrimitive g;
    g.position = {static_cast<float>(x), static_cast<float>(y), 0.0f};
    const auto s = static_cast<float>(0.6 * spacing);
    g.scale = {s, s, static_cast<float>(0.05 * spacing)};
    // Overlapping half-transparent splats keep the composite close to
    // view-independent, which the multi-view consistency checks rely on.
    g.opacity = 0.5f;
    const double pi = std::numbers::pi;
    g.color = {clamp01(0.5 + 0.45 * std::sin(pi * x / 2.0 + phase)),
               clamp01(0.5 + 0.45 * std::cos(pi * y / 1.7)),
               clamp01(0.5 + 0.45 * std::sin(pi * (x + y) / 2.6 - phase))};
    scene.gaussians.push_back(std::move(g));
  }
  return scene;
}

}  // namespace

Mat3 GaussianPrimitive::rotation_matrix() const {
  return quat_to_mat({rotation[0], rotation[1], rotation[2], rotation[3]});
}

Mat3 GaussianPrimitive::covariance() const {
  const Mat3 r = rotation_matrix();
  Mat3 rs = r;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) rs[3 * i + j] *= static_cast<double>(scale[j]) * scale[j];
  return rs * transpose(r);
}

void GaussianScene::validate() const {
  if (gaussians.empty()) throw ValidationError("scene: must contain at least one Gaussian");
  for (std::size_t i = 0; i < gaussians.size(); ++i) {
    const auto& g = gaussians[i];
    const std::string where = "scene: Gaussian " + std::to_string(i) + ": ";
    double qn = 0.0;
    for (float v : g.rotation) qn += static_cast<double>(v) * v;
    if (!(std::abs(std::sqrt(qn) - 1.0) <= 1e-6)) throw ValidationError(where + "rotation is not a unit quaternion");
    for (float s : g.scale)
      if (!(s > 0.0f) || !std::isfinite(s)) throw ValidationError(where + "scale must be positive and finite");
    for (float p : g.position)
      if (!std::isfinite(p)) throw ValidationError(where + "position is not finite");
    if (!(g.opacity >= 0.0f && g.opacity <= 1.0f)) throw ValidationError(where + "opacity outside [0,1]");
    for (float c : g.color)
      if (!(c >= 0.0f && c <= 1.0f)) throw ValidationError(where + "color outside [0,1]");
    if (g.embedding.size() != embed_dim) {
      throw ValidationError(where + "embedding has " + std::to_string(g.embedding.size()) + " values, scene D is " +
                            std::to_string(embed_dim));
    }
    for (float e : g.embedding)
      if (!std::isfinite(e)) throw ValidationError(where + "embedding is not finite");
  }
}

void Camera::validate() const {
  if (!(near > 0.0 && near < far)) throw ValidationError("camera: need 0 < near < far");
  if (width < 1 || height < 1) throw ValidationError("camera: width and height must be >= 1");
  if (!(focal > 0.0)) throw ValidationError("camera: focal must be positive");
  double qn = 0.0;
  for (double v : orientation) qn += v * v;
  if (std::abs(std::sqrt(qn) - 1.0) > 1e-6) throw ValidationError("camera: orientation is not a unit quaternion");
}

Mat3 Camera::world_to_camera() const { return transpose(quat_to_mat(orientation)); }

Vec3 Camera::to_camera(const Vec3& world) const { return world_to_camera() * (world - position); }

Vec3 Camera::to_world(const Vec3& cam) const { return quat_to_mat(orientation) * cam + position; }

std::string to_string(ToySceneKind kind) {
  switch (kind) {
    case ToySceneKind::lattice:
      return "lattice";
    case ToySceneKind::two_clusters:
      return "two_clusters";
    case ToySceneKind::textured_slab:
      return "textured_slab";
  }
  return "unknown";
}

ToySceneKind parse_toy_scene_kind(const std::string& text) {
  if (text == "lattice") return ToySceneKind::lattice;
  if (text == "two_clusters") return ToySceneKind::two_clusters;
  if (text == "textured_slab") return ToySceneKind::textured_slab;
  throw ValidationError("unknown scene kind \"" + text + "\" (expected lattice, two_clusters or textured_slab)");
}

GaussianScene generate_toy_scene(ToySceneKind kind, std::size_t n, std::uint64_t seed, std::size_t embed_dim) {
  if (n == 0) throw ValidationError("generate_toy_scene: n must be >= 1");
  if (embed_dim == 0) throw ValidationError("generate_toy_scene: embedding dimension must be >= 1");
  CounterRng rng(seed, "scene/" + to_string(kind));
  GaussianScene scene;
  switch (kind) {
    case ToySceneKind::lattice:
      scene = make_lattice(n, rng);
      break;
    case ToySceneKind::two_clusters:
      scene = make_two_clusters(n, rng);
      break;
    case ToySceneKind::textured_slab:
      scene = make_textured_slab(n, rng);
      break;
  }
  scene.embed_dim = embed_dim;
  scene.source_tag = to_string(kind) + ":n=" + std::to_string(n) + ":seed=" + std::to_string(seed);
  for (auto& g : scene.gaussians) g.embedding.assign(embed_dim, 0.0f);
  return scene;
}

Camera resized(const Camera& cam, int width, int height) {
  if (width <= 0 || height <= 0) throw ValidationError("camera: resize target must be positive");
  Camera out = cam;
  out.focal = cam.focal * static_cast<double>(width) / static_cast<double>(cam.width);
  out.width = width;
  out.height = height;
  return out;
}

std::vector<Camera> camera_ring(const Vec3& center, double radius, std::size_t count, const RingOptions& options) {
  if (count < 2) throw ValidationError("camera_ring: count must be >= 2");
  if (!(radius > 0.0)) throw ValidationError("camera_ring: radius must be positive");
  const double elevation = options.elevation_deg * std::numbers::pi / 180.0;
  if (!(std::abs(elevation) < 0.5 * std::numbers::pi)) {
    throw ValidationError("camera_ring: elevation must lie strictly between -90 and 90 degrees");
  }
  const Vec3 up{0, 0, 1};
  std::vector<Camera> cams;
  cams.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double azimuth = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(count);
    const Vec3 offset{radius * std::cos(elevation) * std::cos(azimuth), radius * std::cos(elevation) * std::sin(azimuth),
                      radius * std::sin(elevation)};
    Camera cam;
    cam.position = center + offset;
    const Vec3 forward = normalized(center - cam.position);
    const Vec3 right = normalized(cross(forward, up));
    const Vec3 down = cross(forward, right);
    const Mat3 cam_to_world{right[0], down[0], forward[0], right[1], down[1], forward[1], right[2], down[2], forward[2]};
    cam.orientation = mat_to_quat(cam_to_world);
    cam.focal = options.focal;
    cam.width = options.width;
    cam.height = options.height;
    cam.near = options.near;
    cam.far = options.far;
    cam.validate();
    cams.push_back(cam);
  }
  return cams;
}

std::vector<std::pair<std::size_t, std::size_t>> short_range_pairs(std::size_t count) {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i + 1 < count; ++i) pairs.emplace_back(i, i + 1);
  return pairs;
}

std::vector<std::pair<std::size_t, std::size_t>> long_range_pairs(std::size_t count) {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  const std::size_t step = count / 2;
  if (step == 0) return pairs;
  for (std::size_t i = 0; i + step < count; ++i) pairs.emplace_back(i, i + step);
  return pairs;
}

std::vector<std::uint8_t> encode_scene(const GaussianScene& scene) {
  scene.validate();
  ByteWriter out;
  out.magic("GSCN");
  out.u32(kSceneVersion);
  out.u32(static_cast<std::uint32_t>(scene.gaussians.size()));
  out.u32(static_cast<std::uint32_t>(scene.embed_dim));
  for (const auto& g : scene.gaussians) {
    for (float v : g.position) out.f32(v);
    for (float v : g.rotation) out.f32(v);
    for (float v : g.scale) out.f32(v);
    out.f32(g.opacity);
    for (float v : g.color) out.f32(v);
    for (float v : g.embedding) out.f32(v);
  }
  return out.take();
}

GaussianScene decode_scene(const std::vector<std::uint8_t>& bytes, const std::string& label) {
  ByteReader in(bytes, label);
  in.expect_magic("GSCN");
  const std::size_t version_offset = in.offset();
  const std::uint32_t version = in.u32("version");
  if (version != kSceneVersion) {
    throw FormatError(label + ": unsupported version " + std::to_string(version), version_offset);
  }
  const std::uint32_t n = in.u32("Gaussian count");
  const std::size_t dim_offset = in.offset();
  const std::uint32_t dim = in.u32("embedding dimension");
  if (n == 0) throw FormatError(label + ": scene has no Gaussians", dim_offset - 4);
  if (dim == 0) throw FormatError(label + ": embedding dimension is 0", dim_offset);
  const std::size_t record = 4u * (14u + dim);
  if (in.remaining() != static_cast<std::size_t>(n) * record && in.remaining() % n == 0) {
    // Whole records of a different width: the header D disagrees with the data.
    const std::size_t per_record = in.remaining() / n;
    if (per_record % 4 == 0 && per_record >= 4u * 15u) {
      throw FormatError(label + ": records carry " + std::to_string(per_record / 4 - 14) +
                            " embedding values but header D=" + std::to_string(dim),
                        dim_offset);
    }
  }
  GaussianScene scene;
  scene.embed_dim = dim;
  scene.source_tag = label;
  scene.gaussians.resize(n);
  for (auto& g : scene.gaussians) {
    for (auto& v : g.position) v = in.f32("position");
    for (auto& v : g.rotation) v = in.f32("rotation");
    for (auto& v : g.scale) v = in.f32("scale");
    g.opacity = std::clamp(in.f32("opacity"), 0.0f, 1.0f);
    for (auto& v : g.color) v = in.f32("color");
    g.embedding.resize(dim);
    for (auto& v : g.embedding) v = in.f32("embedding");
  }
  in.expect_end();
  scene.validate();
  return scene;
}

void save_scene(const GaussianScene& scene, const std::filesystem::path& path) {
  write_file_bytes(path, encode_scene(scene));
}

GaussianScene load_scene(const std::filesystem::path& path) {
  return decode_scene(read_file_bytes(path), path.string());
}

}  // namespace subflow
