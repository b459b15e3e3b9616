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
#include <filesystem>
#include <numbers>

#include <Eigen/Dense>

#include "subflow/binary_io.hpp"
#include "subflow/error.hpp"
#include "subflow/rng.hpp"
#include "subflow/scene.hpp"

using namespace subflow;

namespace {

GaussianScene two_gaussian_scene() {
  GaussianScene s;
  s.embed_dim = 3;
  GaussianPrimitive a;
  a.position = {0.1f, -0.2f, 0.3f};
  a.rotation = {0.5f, 0.5f, 0.5f, 0.5f};
  a.scale = {0.2f, 0.3f, 0.4f};
  a.opacity = 0.7f;
  a.color = {0.1f, 0.2f, 0.3f};
  a.embedding = {1.5f, -2.0f, 1e-7f};
  GaussianPrimitive b = a;
  b.position = {1, 2, 3};
  b.rotation = {1, 0, 0, 0};
  b.embedding = {0.0f, 3.25f, -0.125f};
  s.gaussians = {a, b};
  return s;
}

double angle_between(const Vec3& a, const Vec3& b) {
  return std::acos(std::clamp(dot(a, b) / (norm(a) * norm(b)), -1.0, 1.0)) * 180.0 / std::numbers::pi;
}

}  // namespace

TEST_CASE("scene round trip is bit-identical") {
  const auto scene = two_gaussian_scene();
  const auto bytes = encode_scene(scene);
  CHECK(bytes.size() == 16 + 2 * 4 * (14 + 3));
  const auto back = decode_scene(bytes);
  CHECK(back.embed_dim == 3);
  CHECK(back.gaussians == scene.gaussians);
  CHECK(encode_scene(back) == bytes);

  const auto path = std::filesystem::temp_directory_path() / "subflow_scene_test.gscn";
  save_scene(scene, path);
  CHECK(load_scene(path).gaussians == scene.gaussians);
  std::filesystem::remove(path);
}

TEST_CASE("scene decode errors carry byte offsets") {
  const auto bytes = encode_scene(two_gaussian_scene());
  auto truncated = bytes;
  truncated.resize(bytes.size() - 3);
  try {
    decode_scene(truncated);
    FAIL("expected truncation error");
  } catch (const FormatError& e) {
    // The last embedding float starts 4 bytes before the original end.
    CHECK(e.offset() == bytes.size() - 4);
  }

  auto bad_magic = bytes;
  bad_magic[1] = 'X';
  try {
    decode_scene(bad_magic);
    FAIL("expected magic error");
  } catch (const FormatError& e) {
    CHECK(e.offset() == 0);
  }

  auto bad_version = bytes;
  bad_version[4] = 9;
  try {
    decode_scene(bad_version);
    FAIL("expected version error");
  } catch (const FormatError& e) {
    CHECK(e.offset() == 4);
  }

  // Header claims D=5 while records carry D=3.
  auto wrong_dim = bytes;
  wrong_dim[12] = 5;
  try {
    decode_scene(wrong_dim);
    FAIL("expected dimension error");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("D=5") != std::string::npos);
  }
}

TEST_CASE("opacity is clamped at load") {
  auto scene = two_gaussian_scene();
  auto bytes = encode_scene(scene);
  // Opacity of the first record sits after magic+version+N+D and 10 floats.
  ByteWriter w;
  w.f32(1.5f);
  std::copy(w.bytes().begin(), w.bytes().end(), bytes.begin() + 16 + 40);
  CHECK(decode_scene(bytes).gaussians[0].opacity == 1.0f);
}

TEST_CASE("embedding dimension mismatch inside a scene is rejected") {
  auto scene = two_gaussian_scene();
  scene.gaussians[1].embedding.pop_back();
  CHECK_THROWS_AS(scene.validate(), ValidationError);
  CHECK_THROWS_AS(encode_scene(scene), ValidationError);
}

TEST_CASE("covariance spectrum equals squared scales") {
  CounterRng rng(11, "cov-test");
  for (int trial = 0; trial < 20; ++trial) {
    GaussianPrimitive g;
    std::array<double, 4> q{rng.normal(), rng.normal(), rng.normal(), rng.normal()};
    const double n = std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]);
    for (int i = 0; i < 4; ++i) g.rotation[i] = static_cast<float>(q[i] / n);
    for (auto& s : g.scale) s = static_cast<float>(rng.uniform(0.05, 2.0));
    const Mat3 c = g.covariance();
    Eigen::Matrix3d m;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) m(i, j) = c[3 * i + j];
    CHECK((m - m.transpose()).cwiseAbs().maxCoeff() < 1e-12);
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(m);
    std::array<double, 3> expected{};
    for (int i = 0; i < 3; ++i) expected[i] = static_cast<double>(g.scale[i]) * g.scale[i];
    std::sort(expected.begin(), expected.end());
    for (int i = 0; i < 3; ++i) CHECK(solver.eigenvalues()(i) == doctest::Approx(expected[i]).epsilon(1e-5));
  }
}

TEST_CASE("toy scenes are deterministic and valid") {
  for (auto kind : {ToySceneKind::lattice, ToySceneKind::two_clusters, ToySceneKind::textured_slab}) {
    CAPTURE(to_string(kind));
    const auto a = generate_toy_scene(kind, 100, 7);
    const auto b = generate_toy_scene(kind, 100, 7);
    CHECK(a.gaussians == b.gaussians);
    CHECK(a.size() == 100);
    CHECK_NOTHROW(a.validate());
    for (int c = 0; c < 3; ++c) {
      float lo = 1, hi = 0;
      for (const auto& g : a.gaussians) {
        lo = std::min(lo, g.color[c]);
        hi = std::max(hi, g.color[c]);
      }
      CHECK(hi - lo >= 0.5f);
    }
  }
  CHECK(generate_toy_scene(ToySceneKind::lattice, 8, 7).gaussians ==
        generate_toy_scene(ToySceneKind::lattice, 8, 7).gaussians);
  CHECK_THROWS_AS(generate_toy_scene(ToySceneKind::lattice, 0, 7), ValidationError);
  CHECK_THROWS_AS(parse_toy_scene_kind("donut"), ValidationError);
}

TEST_CASE("two clusters are separated by more than five cluster deviations") {
  const auto scene = generate_toy_scene(ToySceneKind::two_clusters, 100, 3);
  std::array<std::vector<double>, 2> xs;
  for (const auto& g : scene.gaussians) xs[g.position[0] < 0 ? 0 : 1].push_back(g.position[0]);
  REQUIRE(xs[0].size() == 50);
  REQUIRE(xs[1].size() == 50);
  std::array<double, 2> mean{}, sd{};
  for (int k = 0; k < 2; ++k) {
    for (double v : xs[k]) mean[k] += v;
    mean[k] /= xs[k].size();
    for (double v : xs[k]) sd[k] += (v - mean[k]) * (v - mean[k]);
    sd[k] = std::sqrt(sd[k] / (xs[k].size() - 1));
  }
  CHECK(mean[1] - mean[0] > 5.0 * std::max(sd[0], sd[1]));
}

TEST_CASE("camera ring geometry") {
  const Vec3 center{0.5, -1.0, 0.25};
  RingOptions opts;
  opts.elevation_deg = 0.0;
  const auto cams4 = camera_ring(center, 3.0, 4, opts);
  for (std::size_t i = 0; i < 4; ++i) {
    const Vec3 pos{cams4[i].position[0], cams4[i].position[1], cams4[i].position[2]};
    CHECK(norm(pos - center) == doctest::Approx(3.0).epsilon(1e-12));
    // The optical axis passes through the centre: it projects to (0, 0, r).
    const Vec3 c = cams4[i].to_camera(center);
    CHECK(std::abs(c[0]) < 1e-9);
    CHECK(std::abs(c[1]) < 1e-9);
    CHECK(c[2] == doctest::Approx(3.0));
    const auto& next = cams4[(i + 1) % 4];
    const Vec3 npos{next.position[0], next.position[1], next.position[2]};
    CHECK(angle_between(pos - center, npos - center) == doctest::Approx(90.0).epsilon(1e-9));
  }

  opts.elevation_deg = 40.0;
  const auto cams8 = camera_ring(center, 2.0, 8, opts);
  const auto far_pairs = long_range_pairs(8);
  REQUIRE(far_pairs.front() == std::pair<std::size_t, std::size_t>{0, 4});
  CHECK(short_range_pairs(8).size() == 7);
  // Azimuthal separation of the designated long-range pair.
  auto azimuth = [&](const Camera& c) { return std::atan2(c.position[1] - center[1], c.position[0] - center[0]); };
  const double sep = std::abs(azimuth(cams8[4]) - azimuth(cams8[0])) * 180.0 / std::numbers::pi;
  CHECK(sep == doctest::Approx(180.0).epsilon(1e-9));
  for (const auto& cam : cams8) {
    const Vec3 c = cam.to_camera(center);
    CHECK(std::abs(c[0]) < 1e-9);
    CHECK(std::abs(c[1]) < 1e-9);
    // Image "down" points towards world -z.
    const Vec3 down = cam.to_world({0, 1, 0}) - cam.to_world({0, 0, 0});
    CHECK(down[2] < 0.0);
  }

  CHECK_THROWS_AS(camera_ring(center, 1.0, 1), ValidationError);
  CHECK_THROWS_AS(camera_ring(center, 0.0, 4), ValidationError);
}

TEST_CASE("camera validation") {
  Camera cam;
  CHECK_NOTHROW(cam.validate());
  cam.near = 2.0;
  cam.far = 1.0;
  CHECK_THROWS_AS(cam.validate(), ValidationError);
  cam = Camera{};
  cam.width = 0;
  CHECK_THROWS_AS(cam.validate(), ValidationError);
}
