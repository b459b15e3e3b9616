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

#include "subflow/transfer.hpp"

#include <algorithm>
#include <cmath>

#include "subflow/adam.hpp"
#include "subflow/error.hpp"
#include "subflow/image.hpp"
#include "subflow/rng.hpp"

namespace subflow {

namespace {

struct DistillView {
  PixelWeights weights;
  Tensor target;  // [P, D] transfer-tap features of the rendered colours
  Tensor mask;    // [P, D], 1 where the pooled footprint is covered
  float covered = 0.0f;
};

// 2x2 box average of a single-channel map, matching avg_pool2.
std::vector<float> pool_alpha(const std::vector<float>& a, int& w, int& h) {
  const int ow = w / 2, oh = h / 2;
  std::vector<float> out(static_cast<std::size_t>(ow) * oh);
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      const auto at = [&](int xx, int yy) { return a[static_cast<std::size_t>(yy) * w + xx]; };
      out[static_cast<std::size_t>(y) * ow + x] =
          0.25f * (at(2 * x, 2 * y) + at(2 * x + 1, 2 * y) + at(2 * x, 2 * y + 1) + at(2 * x + 1, 2 * y + 1));
    }
  w = ow;
  h = oh;
  return out;
}

Tensor to_pixel_rows(const Tensor& map) {
  const std::size_t c = map.dim(1), p = map.dim(2) * map.dim(3);
  return transpose2d(reshape(map, {c, p}));
}

DistillView make_view(const GaussianScene& scene, const Camera& cam, const VggEncoder& encoder, int size) {
  const std::size_t d = scene.embed_dim;
  DistillView v;
  RenderOptions opts;
  opts.features = false;
  v.weights = pixel_weights(scene, resized(cam, size, size), opts);
  const auto rgb = composite_attributes(v.weights, color_matrix(scene), 3);
  NoGradGuard guard;
  const auto taps = encoder.net().taps(image_to_tensor(rgb));
  const auto& tap = taps[encoder.transfer_tap()];
  const auto rows = to_pixel_rows(tap);
  v.target = slice_cols(rows, 0, d).detach();

  int w = size, h = size;
  auto alpha = v.weights.alpha;
  for (std::size_t k = 0; k < encoder.transfer_tap(); ++k) alpha = pool_alpha(alpha, w, h);
  if (static_cast<std::size_t>(w) * h != rows.dim(0)) throw Error("distill: tap resolution does not match pooled alpha");
  std::vector<float> mask(alpha.size() * d, 0.0f);
  for (std::size_t p = 0; p < alpha.size(); ++p) {
    if (alpha[p] < 0.5f) continue;
    std::fill_n(mask.begin() + static_cast<std::ptrdiff_t>(p * d), d, 1.0f);
    v.covered += static_cast<float>(d);
  }
  v.mask = Tensor::from({alpha.size(), d}, std::move(mask));
  return v;
}

}  // namespace

void StyleStats::validate() const {
  if (mu.empty()) throw ValidationError("style stats: empty");
  if (mu.size() != sigma.size()) throw ValidationError("style stats: mu and sigma lengths differ");
  for (std::size_t c = 0; c < mu.size(); ++c) {
    if (!std::isfinite(mu[c]) || !std::isfinite(sigma[c])) throw NumericError("style stats: non-finite channel " + std::to_string(c));
    if (sigma[c] < kEpsilonStd) throw ValidationError("style stats: sigma below epsilon at channel " + std::to_string(c));
  }
}

StyleStats population_stats(std::span<const float> rows, std::size_t n, std::size_t d) {
  if (n == 0 || d == 0 || rows.size() != n * d) throw ValidationError("population_stats: bad shape");
  StyleStats s;
  s.mu.resize(d);
  s.sigma.resize(d);
  for (std::size_t c = 0; c < d; ++c) {
    double m = 0.0;
    for (std::size_t i = 0; i < n; ++i) m += rows[i * d + c];
    m /= static_cast<double>(n);
    double v = 0.0;
    for (std::size_t i = 0; i < n; ++i) v += (rows[i * d + c] - m) * (rows[i * d + c] - m);
    v /= static_cast<double>(n);
    s.mu[c] = static_cast<float>(m);
    s.sigma[c] = std::max(static_cast<float>(std::sqrt(v)), kEpsilonStd);
  }
  return s;
}

StyleStats stats_from_feature(const FeatureSet& f) {
  f.validate();
  return population_stats(f.vectors, f.count(), f.dim);
}

StyleStats stats_from_vector(std::span<const float> v) {
  if (v.empty() || v.size() % 2 != 0) {
    throw ValidationError("stats_from_vector: expected an even, non-empty length, got " + std::to_string(v.size()));
  }
  const std::size_t d = v.size() / 2;
  StyleStats s;
  s.mu.assign(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(d));
  s.sigma.resize(d);
  for (std::size_t c = 0; c < d; ++c) {
    const double x = v[d + c];
    const double sp = x > 20.0 ? x : std::log1p(std::exp(x));
    s.sigma[c] = std::max(static_cast<float>(sp), kEpsilonStd);
  }
  return s;
}

AdainResult adain(std::span<const float> embeddings, std::size_t n, const StyleStats& style) {
  style.validate();
  const std::size_t d = style.dim();
  if (n < 2) throw ValidationError("adain: need at least 2 rows for population statistics");
  if (embeddings.size() != n * d) {
    throw ValidationError("adain: expected " + std::to_string(n) + " x " + std::to_string(d) + " embeddings");
  }
  AdainResult r;
  r.values.resize(n * d);
  for (std::size_t c = 0; c < d; ++c) {
    double m = 0.0;
    for (std::size_t i = 0; i < n; ++i) m += embeddings[i * d + c];
    m /= static_cast<double>(n);
    double v = 0.0;
    for (std::size_t i = 0; i < n; ++i) v += (embeddings[i * d + c] - m) * (embeddings[i * d + c] - m);
    double sd = std::sqrt(v / static_cast<double>(n));
    if (sd < kEpsilonStd) {
      sd = kEpsilonStd;
      r.degenerate = true;
    }
    const double k = style.sigma[c] / sd;
    for (std::size_t i = 0; i < n; ++i) {
      r.values[i * d + c] = static_cast<float>(k * (embeddings[i * d + c] - m) + style.mu[c]);
    }
  }
  return r;
}

Tensor adain_map(const Tensor& features, const StyleStats& style) {
  if (features.rank() != 4 || features.dim(0) != 1 || features.dim(1) != style.dim()) {
    throw ValidationError("adain_map: expected [1, " + std::to_string(style.dim()) + ", H, W], got " +
                          shape_string(features.shape()));
  }
  const std::size_t c = features.dim(1), p = features.dim(2) * features.dim(3);
  // Channel-major storage: transpose so rows are positions.
  std::vector<float> rows(p * c);
  const auto src = features.data();
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t i = 0; i < p; ++i) rows[i * c + ch] = src[ch * p + i];
  const auto out = adain(rows, p, style).values;
  std::vector<float> back(p * c);
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t i = 0; i < p; ++i) back[ch * p + i] = out[i * c + ch];
  return Tensor::from(features.shape(), std::move(back));
}

ColorDecoder::ColorDecoder(std::size_t dim, std::size_t hidden, std::uint64_t seed) {
  DenseNetSpec spec;
  spec.layer_widths = {dim, hidden, hidden, 3};
  spec.hidden_activations = {Activation::relu};
  spec.output_activation = Activation::sigmoid;
  spec.seed = seed;
  net_ = DenseNet<float>(spec);
}

ColorDecoder ColorDecoder::clone() const {
  ColorDecoder out;
  out.net_ = DenseNet<float>(net_.spec());
  copy_parameter_values(net_.parameters(), out.net_.parameters());
  return out;
}

std::vector<float> ColorDecoder::decode(std::span<const float> embeddings) const {
  if (embeddings.size() % dim() != 0) throw ValidationError("decoder: embedding length is not a multiple of D");
  NoGradGuard guard;
  const auto out = forward(Tensor::from({embeddings.size() / dim(), dim()}, {embeddings.begin(), embeddings.end()}));
  return {out.data().begin(), out.data().end()};
}

Tensor splat_attributes(const PixelWeights& w, const Tensor& attributes) {
  const std::size_t c = attributes.dim(1);
  const auto px = sparse_matmul<float>(w.weights, attributes);
  return reshape(transpose2d(px), {1, c, static_cast<std::size_t>(w.height), static_cast<std::size_t>(w.width)});
}

DistillResult distill_embeddings(const GaussianScene& scene, const std::vector<Camera>& cams, const VggEncoder& encoder,
                                 const DistillConfig& cfg) {
  if (cams.empty()) throw ValidationError("distill_embeddings: no cameras");
  scene.validate();
  const std::size_t n = scene.gaussians.size(), d = scene.embed_dim;
  if (encoder.style_dim() != d) {
    throw ValidationError("distill_embeddings: scene embeds " + std::to_string(d) + " channels but the encoder transfers " +
                          std::to_string(encoder.style_dim()));
  }
  if (cfg.image_size < 8 || cfg.image_size % 8 != 0) throw ValidationError("distill_embeddings: image_size must be a multiple of 8");

  CounterRng lift_rng(cfg.seed, "distill/lift");
  std::vector<double> lift(d * 3);
  for (auto& x : lift) x = lift_rng.normal() / std::sqrt(3.0);
  std::vector<float> init(n * d);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& col = scene.gaussians[i].color;
    for (std::size_t r = 0; r < d; ++r) {
      double s = 0.0;
      for (std::size_t k = 0; k < 3; ++k) s += lift[r * 3 + k] * (col[k] - 0.5);
      init[i * d + r] = static_cast<float>(s);
    }
  }
  auto embeddings = Tensor::from({n, d}, std::move(init), true);
  const auto colors = Tensor::from({n, 3}, color_matrix(scene));

  DistillResult result;
  result.decoder = ColorDecoder(d, cfg.hidden_width, derive_seed(cfg.seed, "distill/decoder"));
  std::vector<DistillView> views;
  if (cfg.projection_weight > 0.0f) {
    for (const auto& cam : cams) views.push_back(make_view(scene, cam, encoder, cfg.image_size));
  }

  auto params = result.decoder.parameters();
  params.push_back(embeddings);
  Adam opt(params, cfg.learning_rate);
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    opt.zero_grad();
    const auto recon = mse(result.decoder.forward(embeddings), colors);
    auto loss = recon;
    if (!views.empty()) {
      const auto& v = views[step % views.size()];
      if (v.covered > 0.0f) {
        auto map = splat_attributes(v.weights, embeddings);
        for (std::size_t k = 0; k < encoder.transfer_tap(); ++k) map = avg_pool2(map);
        const auto diff = sub(to_pixel_rows(map), v.target);
        const auto proj = scale(sum(mul(square(diff), v.mask)), 1.0f / v.covered);
        loss = add(loss, scale(proj, cfg.projection_weight));
        result.projection_losses.push_back(proj.item());
      }
    }
    backward(loss);
    opt.step();
    result.reconstruction_losses.push_back(recon.item());
  }

  result.scene = scene;
  const auto e = embeddings.data();
  for (std::size_t i = 0; i < n; ++i) {
    auto& emb = result.scene.gaussians[i].embedding;
    emb.assign(e.begin() + static_cast<std::ptrdiff_t>(i * d), e.begin() + static_cast<std::ptrdiff_t>((i + 1) * d));
  }
  return result;
}

double reconstruction_error(const GaussianScene& scene, const ColorDecoder& decoder) {
  const auto decoded = decoder.decode(embedding_matrix(scene));
  const auto colors = color_matrix(scene);
  double s = 0.0;
  for (std::size_t i = 0; i < colors.size(); ++i) s += (decoded[i] - colors[i]) * (decoded[i] - colors[i]);
  return s / static_cast<double>(scene.gaussians.size());
}

bool is_distilled(const GaussianScene& scene) {
  for (const auto& g : scene.gaussians)
    for (float x : g.embedding)
      if (x != 0.0f) return true;
  return false;
}

GaussianScene stylize_scene(const GaussianScene& scene, const StyleStats& style, const ColorDecoder& decoder,
                            bool* degenerate) {
  if (!is_distilled(scene)) throw ValidationError("stylize_scene: scene has no distilled embeddings");
  if (style.dim() != scene.embed_dim || decoder.dim() != scene.embed_dim) {
    throw ValidationError("stylize_scene: style/decoder dimension does not match the scene embedding dimension " +
                          std::to_string(scene.embed_dim));
  }
  const auto transferred = adain(embedding_matrix(scene), scene.gaussians.size(), style);
  if (degenerate) *degenerate = transferred.degenerate;
  const auto colors = decoder.decode(transferred.values);
  GaussianScene out = scene;
  for (std::size_t i = 0; i < out.gaussians.size(); ++i) {
    for (std::size_t k = 0; k < 3; ++k) out.gaussians[i].color[k] = colors[i * 3 + k];
  }
  out.validate();
  return out;
}

}  // namespace subflow
