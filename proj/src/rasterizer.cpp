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

#include "subflow/rasterizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <tuple>

#include "subflow/error.hpp"
#include "subflow/parallel.hpp"

namespace subflow {

namespace {

constexpr float kInf = std::numeric_limits<float>::infinity();
constexpr double kDepthThreshold = 0.5;

struct Prepared {
  Splat2D splat;
  simd::SplatConic conic;
  int x0, x1, y0, y1;  // inclusive pixel bounds
  Vec3 mean_cam;
  Mat3 inv_cov_cam;
  const GaussianPrimitive* source;
};

Mat3 inverse3(const Mat3& m) {
  const double a = m[0], b = m[1], c = m[2], d = m[3], e = m[4], f = m[5], g = m[6], h = m[7], i = m[8];
  const double A = e * i - f * h, B = -(d * i - f * g), C = d * h - e * g;
  const double det = a * A + b * B + c * C;
  const double s = 1.0 / det;
  return {A * s, -(b * i - c * h) * s, (b * f - c * e) * s, B * s, (a * i - c * g) * s, -(a * f - c * d) * s,
          C * s, -(a * h - b * g) * s, (a * e - b * d) * s};
}

std::vector<Prepared> prepare(const GaussianScene& scene, const Camera& cam) {
  if (scene.gaussians.empty()) throw ValidationError("render: scene is empty");
  cam.validate();
  const Mat3 w = cam.world_to_camera();
  std::vector<Prepared> out;
  out.reserve(scene.gaussians.size());
  for (std::size_t i = 0; i < scene.gaussians.size(); ++i) {
    const auto& g = scene.gaussians[i];
    auto splat = project_gaussian(g, cam, i);
    if (!splat) continue;
    const auto& cv = splat->cov2d;
    const double rx = 3.0 * std::sqrt(cv[0]);
    const double ry = 3.0 * std::sqrt(cv[2]);
    const double mx = splat->mean2d[0], my = splat->mean2d[1];
    // One pixel of slack; the kernel's cutoff decides the exact footprint.
    const double bx0 = std::ceil(mx - rx - 0.5) - 1, bx1 = std::floor(mx + rx - 0.5) + 1;
    const double by0 = std::ceil(my - ry - 0.5) - 1, by1 = std::floor(my + ry - 0.5) + 1;
    if (bx1 < 0 || by1 < 0 || bx0 > cam.width - 1 || by0 > cam.height - 1) continue;
    Prepared p;
    p.splat = *splat;
    const double det = cv[0] * cv[2] - cv[1] * cv[1];
    p.conic.mean_x = static_cast<float>(mx);
    p.conic.mean_y = static_cast<float>(my);
    p.conic.conic_a = static_cast<float>(cv[2] / det);
    p.conic.conic_b = static_cast<float>(-cv[1] / det);
    p.conic.conic_c = static_cast<float>(cv[0] / det);
    p.conic.opacity = g.opacity;
    p.x0 = static_cast<int>(std::max(bx0, 0.0));
    p.x1 = static_cast<int>(std::min(bx1, static_cast<double>(cam.width - 1)));
    p.y0 = static_cast<int>(std::max(by0, 0.0));
    p.y1 = static_cast<int>(std::min(by1, static_cast<double>(cam.height - 1)));
    const Vec3 pos{g.position[0], g.position[1], g.position[2]};
    p.mean_cam = cam.to_camera(pos);
    p.inv_cov_cam = inverse3(w * g.covariance() * transpose(w));
    p.source = &g;
    out.push_back(p);
  }
  // Ties are broken on content, never on list position, so that reordering
  // the scene cannot change the image.
  std::sort(out.begin(), out.end(), [](const Prepared& a, const Prepared& b) {
    const auto key = [](const Prepared& p) {
      return std::make_tuple(p.splat.view_depth, p.splat.mean2d[0], p.splat.mean2d[1], p.source->opacity,
                             p.source->color[0], p.source->color[1], p.source->color[2]);
    };
    return key(a) < key(b);
  });
  return out;
}

// Camera-space depth of the point of maximum density of the splat's Gaussian
// along the ray through pixel (x, y).
float ray_depth(const Prepared& p, const Camera& cam, int x, int y) {
  const Vec3 d{(x + 0.5 - cam.cx()) / cam.focal, (y + 0.5 - cam.cy()) / cam.focal, 1.0};
  const Vec3 sd = p.inv_cov_cam * d;
  const double denom = dot(d, sd);
  const double t = dot(sd, p.mean_cam) / denom;
  if (!(t > 0.0) || !std::isfinite(t)) return static_cast<float>(p.splat.view_depth);
  return static_cast<float>(t);
}

struct PixelEntries {
  std::vector<std::vector<std::pair<std::uint32_t, float>>> lists;
  std::vector<int> crossing;
  std::vector<float> transmittance;
};

PixelWeights assemble(const Camera& cam, const std::vector<Prepared>& splats, std::size_t n_gaussians,
                      PixelEntries& px) {
  PixelWeights out;
  out.width = cam.width;
  out.height = cam.height;
  const std::size_t n_pixels = static_cast<std::size_t>(cam.width) * cam.height;
  auto w = std::make_shared<SparseRows>();
  w->rows = n_pixels;
  w->cols = n_gaussians;
  w->offsets.assign(1, 0);
  for (std::size_t p = 0; p < n_pixels; ++p) {
    for (const auto& [s, value] : px.lists[p]) {
      w->indices.push_back(static_cast<std::uint32_t>(splats[s].splat.source_index));
      w->values.push_back(value);
    }
    w->offsets.push_back(w->indices.size());
  }
  out.weights = std::move(w);
  out.depth.assign(n_pixels, kInf);
  out.alpha.resize(n_pixels);
  for (std::size_t p = 0; p < n_pixels; ++p) {
    out.alpha[p] = std::clamp(1.0f - px.transmittance[p], 0.0f, 1.0f);
    if (px.crossing[p] >= 0) {
      const int x = static_cast<int>(p % cam.width), y = static_cast<int>(p / cam.width);
      out.depth[p] = ray_depth(splats[px.crossing[p]], cam, x, y);
    }
  }
  return out;
}

PixelEntries make_entries(std::size_t n_pixels) {
  PixelEntries px;
  px.lists.resize(n_pixels);
  px.crossing.assign(n_pixels, -1);
  px.transmittance.assign(n_pixels, 1.0f);
  return px;
}

}  // namespace

std::optional<Splat2D> project_gaussian(const GaussianPrimitive& g, const Camera& cam, std::size_t index) {
  const Vec3 t = cam.to_camera({g.position[0], g.position[1], g.position[2]});
  if (!(t[2] >= cam.near && t[2] <= cam.far)) return std::nullopt;
  // Clamp the Jacobian's evaluation point for far off-axis splats.
  const double lim_x = 1.3 * 0.5 * cam.width / cam.focal;
  const double lim_y = 1.3 * 0.5 * cam.height / cam.focal;
  const double jx = std::clamp(t[0] / t[2], -lim_x, lim_x) * t[2];
  const double jy = std::clamp(t[1] / t[2], -lim_y, lim_y) * t[2];
  const double f = cam.focal, z = t[2];
  const Mat3 j{f / z, 0, -f * jx / (z * z), 0, f / z, -f * jy / (z * z), 0, 0, 0};
  const Mat3 m = j * cam.world_to_camera();
  const Mat3 cov = m * g.covariance() * transpose(m);
  Splat2D s;
  s.mean2d = {f * t[0] / z + cam.cx(), f * t[1] / z + cam.cy()};
  s.cov2d = {cov[0] + kLowPass, cov[1], cov[4] + kLowPass};
  s.view_depth = z;
  s.source_index = index;
  return s;
}

PixelWeights pixel_weights(const GaussianScene& scene, const Camera& cam, const RenderOptions& options) {
  const auto splats = prepare(scene, cam);
  const auto& kernels = options.kernels ? *options.kernels : simd::active_kernels();
  const int tiles_x = (cam.width + kTileSize - 1) / kTileSize;
  const int tiles_y = (cam.height + kTileSize - 1) / kTileSize;
  std::vector<std::vector<std::uint32_t>> bins(static_cast<std::size_t>(tiles_x) * tiles_y);
  for (std::size_t s = 0; s < splats.size(); ++s) {
    const auto& p = splats[s];
    for (int ty = p.y0 / kTileSize; ty <= p.y1 / kTileSize; ++ty)
      for (int tx = p.x0 / kTileSize; tx <= p.x1 / kTileSize; ++tx)
        bins[static_cast<std::size_t>(ty) * tiles_x + tx].push_back(static_cast<std::uint32_t>(s));
  }
  auto px = make_entries(static_cast<std::size_t>(cam.width) * cam.height);
  parallel_for(bins.size(), [&](std::size_t tile) {
    const int tx0 = static_cast<int>(tile % tiles_x) * kTileSize;
    const int ty0 = static_cast<int>(tile / tiles_x) * kTileSize;
    const int tx1 = std::min(tx0 + kTileSize, cam.width) - 1;
    const int ty1 = std::min(ty0 + kTileSize, cam.height) - 1;
    int live = (tx1 - tx0 + 1) * (ty1 - ty0 + 1);
    float trans[kTileSize * kTileSize];
    float weight[kTileSize];
    std::fill(trans, trans + kTileSize * kTileSize, 1.0f);
    for (std::uint32_t s : bins[tile]) {
      const auto& p = splats[s];
      const int xa = std::max(tx0, p.x0), xb = std::min(tx1, p.x1);
      const int ya = std::max(ty0, p.y0), yb = std::min(ty1, p.y1);
      if (xa > xb || ya > yb) continue;
      for (int y = ya; y <= yb; ++y) {
        float* t_row = trans + (y - ty0) * kTileSize + (xa - tx0);
        const std::size_t n = static_cast<std::size_t>(xb - xa + 1);
        float before[kTileSize];
        std::copy(t_row, t_row + n, before);
        kernels.composite_run(p.conic, xa, y, n, t_row, weight);
        for (std::size_t i = 0; i < n; ++i) {
          if (weight[i] == 0.0f) continue;
          const std::size_t pixel = static_cast<std::size_t>(y) * cam.width + xa + i;
          px.lists[pixel].emplace_back(s, weight[i]);
          if (px.crossing[pixel] < 0 && t_row[i] <= 1.0f - kDepthThreshold) px.crossing[pixel] = static_cast<int>(s);
          if (before[i] >= simd::kMinTransmittance && t_row[i] < simd::kMinTransmittance) --live;
        }
      }
      if (live == 0) break;
    }
    for (int y = ty0; y <= ty1; ++y)
      for (int x = tx0; x <= tx1; ++x)
        px.transmittance[static_cast<std::size_t>(y) * cam.width + x] = trans[(y - ty0) * kTileSize + (x - tx0)];
  });
  return assemble(cam, splats, scene.gaussians.size(), px);
}

PixelWeights pixel_weights_reference(const GaussianScene& scene, const Camera& cam) {
  const auto splats = prepare(scene, cam);
  const auto& kernels = simd::scalar_kernels();
  auto px = make_entries(static_cast<std::size_t>(cam.width) * cam.height);
  for (int y = 0; y < cam.height; ++y) {
    for (int x = 0; x < cam.width; ++x) {
      const std::size_t pixel = static_cast<std::size_t>(y) * cam.width + x;
      float& t = px.transmittance[pixel];
      for (std::size_t s = 0; s < splats.size(); ++s) {
        float w = 0.0f;
        kernels.composite_run(splats[s].conic, x, y, 1, &t, &w);
        if (w == 0.0f) continue;
        px.lists[pixel].emplace_back(static_cast<std::uint32_t>(s), w);
        if (px.crossing[pixel] < 0 && t <= 1.0f - kDepthThreshold) px.crossing[pixel] = static_cast<int>(s);
      }
    }
  }
  return assemble(cam, splats, scene.gaussians.size(), px);
}

Image composite_attributes(const PixelWeights& w, const std::vector<float>& attributes, int channels) {
  const auto& sparse = *w.weights;
  if (attributes.size() != sparse.cols * static_cast<std::size_t>(channels)) {
    throw ValidationError("composite_attributes: expected " + std::to_string(sparse.cols) + " x " +
                          std::to_string(channels) + " attributes, got " + std::to_string(attributes.size()));
  }
  const auto& kernels = simd::active_kernels();
  Image out(w.width, w.height, channels);
  for (std::size_t p = 0; p < sparse.rows; ++p) {
    float* dst = out.data.data() + p * channels;
    for (std::size_t k = sparse.offsets[p]; k < sparse.offsets[p + 1]; ++k) {
      kernels.axpy(sparse.values[k], attributes.data() + static_cast<std::size_t>(sparse.indices[k]) * channels, dst,
                   static_cast<std::size_t>(channels));
    }
  }
  return out;
}

std::vector<float> color_matrix(const GaussianScene& scene) {
  std::vector<float> m;
  m.reserve(scene.gaussians.size() * 3);
  for (const auto& g : scene.gaussians) m.insert(m.end(), g.color.begin(), g.color.end());
  return m;
}

std::vector<float> embedding_matrix(const GaussianScene& scene) {
  std::vector<float> m;
  m.reserve(scene.gaussians.size() * scene.embed_dim);
  for (const auto& g : scene.gaussians) m.insert(m.end(), g.embedding.begin(), g.embedding.end());
  return m;
}

RenderOutput resolve_render(const PixelWeights& w, const GaussianScene& scene, bool features) {
  RenderOutput out;
  out.rgb = composite_attributes(w, color_matrix(scene), 3);
  for (auto& v : out.rgb.data) v = std::clamp(v, 0.0f, 1.0f);
  if (features) out.features = composite_attributes(w, embedding_matrix(scene), static_cast<int>(scene.embed_dim));
  out.depth = Image(w.width, w.height, 1);
  out.depth.data = w.depth;
  out.alpha_mask = Image(w.width, w.height, 1);
  out.alpha_mask.data = w.alpha;
  return out;
}

RenderOutput render(const GaussianScene& scene, const Camera& cam, const RenderOptions& options) {
  return resolve_render(pixel_weights(scene, cam, options), scene, options.features);
}

RenderOutput render_reference(const GaussianScene& scene, const Camera& cam) {
  return resolve_render(pixel_weights_reference(scene, cam), scene, true);
}

std::size_t WarpMap::valid_count() const {
  return static_cast<std::size_t>(std::count(valid.begin(), valid.end(), std::uint8_t{1}));
}

WarpMap warp_map(const Camera& src, const Camera& dst, const Image& depth_src, const Image* depth_dst) {
  if (depth_src.width != src.width || depth_src.height != src.height || depth_src.channels != 1) {
    throw ValidationError("warp_map: source depth map does not match the source camera");
  }
  if (depth_dst && (depth_dst->width != dst.width || depth_dst->height != dst.height || depth_dst->channels != 1)) {
    throw ValidationError("warp_map: destination depth map does not match the destination camera");
  }
  WarpMap map;
  map.width = src.width;
  map.height = src.height;
  const std::size_t n = depth_src.pixel_count();
  map.x.assign(n, 0.0f);
  map.y.assign(n, 0.0f);
  map.valid.assign(n, 0);
  for (int v = 0; v < src.height; ++v) {
    for (int u = 0; u < src.width; ++u) {
      const std::size_t p = static_cast<std::size_t>(v) * src.width + u;
      const double d = depth_src.data[p];
      if (!std::isfinite(d) || d <= 0.0) continue;
      const Vec3 cam_pt{(u + 0.5 - src.cx()) / src.focal * d, (v + 0.5 - src.cy()) / src.focal * d, d};
      const Vec3 q = dst.to_camera(src.to_world(cam_pt));
      if (!(q[2] >= dst.near)) continue;
      const double x = dst.focal * q[0] / q[2] + dst.cx() - 0.5;
      const double y = dst.focal * q[1] / q[2] + dst.cy() - 0.5;
      if (x < -0.5 || y < -0.5 || x > dst.width - 0.5 || y > dst.height - 0.5) continue;
      if (depth_dst) {
        const int nx = std::clamp(static_cast<int>(std::lround(x)), 0, dst.width - 1);
        const int ny = std::clamp(static_cast<int>(std::lround(y)), 0, dst.height - 1);
        const double seen = depth_dst->at(nx, ny, 0);
        if (!std::isfinite(seen) || std::abs(seen - q[2]) > kOcclusionTolerance * q[2]) continue;
      }
      map.x[p] = static_cast<float>(x);
      map.y[p] = static_cast<float>(y);
      map.valid[p] = 1;
    }
  }
  return map;
}

}  // namespace subflow
