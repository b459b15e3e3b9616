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

#include "subflow/features.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "subflow/binary_io.hpp"
#include "subflow/error.hpp"
#include "subflow/rng.hpp"

namespace subflow {

namespace {

constexpr std::uint32_t kFeatVersion = 1;

std::size_t draw_component(const GaussianMixture& mix, CounterRng& rng) {
  double u = rng.uniform();
  for (std::size_t k = 0; k + 1 < mix.components.size(); ++k) {
    u -= mix.components[k].weight;
    if (u < 0.0) return k;
  }
  return mix.components.size() - 1;
}

void push_through(const GaussianComponent& c, const std::vector<double>& chol, const std::vector<double>& z,
                  std::vector<float>& out) {
  const std::size_t d = c.mean.size();
  for (std::size_t i = 0; i < d; ++i) {
    double v = c.mean[i];
    for (std::size_t j = 0; j <= i; ++j) v += chol[i * d + j] * z[j];
    out.push_back(static_cast<float>(v));
  }
}

}  // namespace

std::string to_string(FeatureDomain d) {
  switch (d) {
    case FeatureDomain::clip_like:
      return "clip_like";
    case FeatureDomain::vgg_like:
      return "vgg_like";
    case FeatureDomain::clip_mapped:
      return "clip_mapped";
  }
  return "unknown";
}

std::string to_string(Provenance p) {
  switch (p) {
    case Provenance::pseudo_encoder:
      return "pseudo_encoder";
    case Provenance::synthetic_pair:
      return "synthetic_pair";
    case Provenance::imported:
      return "imported";
  }
  return "unknown";
}

void FeatureSet::append(std::span<const float> v) {
  if (v.size() != dim) {
    throw ValidationError("FeatureSet: appending a " + std::to_string(v.size()) + "-vector to a set of dim " +
                          std::to_string(dim));
  }
  vectors.insert(vectors.end(), v.begin(), v.end());
}

void FeatureSet::validate() const {
  if (dim == 0) throw ValidationError("FeatureSet: dim must be >= 1");
  if (vectors.empty() || vectors.size() % dim != 0) {
    throw ValidationError("FeatureSet: " + std::to_string(vectors.size()) + " values do not form rows of dim " +
                          std::to_string(dim));
  }
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    if (!std::isfinite(vectors[i])) {
      throw ValidationError("FeatureSet: non-finite value in row " + std::to_string(i / dim));
    }
  }
}

Tensor FeatureSet::to_tensor() const { return Tensor::from({count(), dim}, vectors); }

FeatureSet FeatureSet::from_tensor(const Tensor& t, FeatureDomain d, Provenance p) {
  if (t.rank() != 2) throw ValidationError("FeatureSet::from_tensor: expected a matrix, got " + shape_string(t.shape()));
  FeatureSet f(d, t.dim(1), p);
  f.vectors.assign(t.data().begin(), t.data().end());
  return f;
}

std::vector<std::uint8_t> encode_features(const FeatureSet& f) {
  f.validate();
  ByteWriter out;
  out.magic("FEAT");
  out.u32(kFeatVersion);
  out.u32(static_cast<std::uint32_t>(f.count()));
  out.u32(static_cast<std::uint32_t>(f.dim));
  std::uint8_t tag = 0;
  if (f.domain == FeatureDomain::vgg_like) tag = 1;
  if (f.domain == FeatureDomain::clip_mapped) tag = 2;
  out.u8(tag);
  for (float v : f.vectors) out.f32(v);
  return out.take();
}

FeatureSet decode_features(const std::vector<std::uint8_t>& bytes, const std::string& label) {
  ByteReader in(bytes, label);
  in.expect_magic("FEAT");
  const std::size_t version_at = in.offset();
  const std::uint32_t version = in.u32("version");
  if (version != kFeatVersion) throw FormatError(label + ": unsupported version " + std::to_string(version), version_at);
  const std::size_t count_at = in.offset();
  const std::uint32_t count = in.u32("count");
  const std::size_t dim_at = in.offset();
  const std::uint32_t dim = in.u32("dim");
  if (count == 0) throw FormatError(label + ": feature count is 0", count_at);
  if (dim == 0) throw FormatError(label + ": feature dim is 0", dim_at);
  const std::size_t tag_at = in.offset();
  const std::uint8_t tag = in.u8("domain tag");
  if (tag > 2) throw FormatError(label + ": unknown domain tag " + std::to_string(tag), tag_at);
  const std::size_t expected = static_cast<std::size_t>(count) * dim * 4;
  if (in.remaining() != expected) {
    throw FormatError(label + ": payload holds " + std::to_string(in.remaining()) + " bytes but header declares " +
                          std::to_string(count) + " x " + std::to_string(dim) + " floats",
                      count_at);
  }
  const FeatureDomain domain =
      tag == 0 ? FeatureDomain::clip_like : tag == 1 ? FeatureDomain::vgg_like : FeatureDomain::clip_mapped;
  FeatureSet f(domain, dim, Provenance::imported);
  f.vectors.resize(static_cast<std::size_t>(count) * dim);
  for (auto& v : f.vectors) v = in.f32("row data");
  in.expect_end();
  f.validate();
  return f;
}

void export_features(const FeatureSet& f, const std::filesystem::path& path) {
  write_file_bytes(path, encode_features(f));
}

FeatureSet import_features(const std::filesystem::path& path) {
  return decode_features(read_file_bytes(path), path.string());
}

void GaussianMixture::validate(const std::string& what) const {
  if (components.empty()) throw ValidationError(what + ": mixture has no components");
  const std::size_t d = dim();
  if (d == 0) throw ValidationError(what + ": component dimension is 0");
  double total = 0.0;
  for (std::size_t k = 0; k < components.size(); ++k) {
    const auto& c = components[k];
    if (c.mean.size() != d || c.covariance.size() != d * d) {
      throw ValidationError(what + ": component " + std::to_string(k) + " has inconsistent dimensions");
    }
    if (!(c.weight >= 0.0)) throw ValidationError(what + ": negative component weight");
    total += c.weight;
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < i; ++j)
        if (std::abs(c.covariance[i * d + j] - c.covariance[j * d + i]) > 1e-9) {
          throw ValidationError(what + ": covariance of component " + std::to_string(k) + " is not symmetric");
        }
    cholesky(c.covariance, d);
  }
  if (std::abs(total - 1.0) > 1e-6) throw ValidationError(what + ": component weights must sum to 1");
}

std::vector<double> cholesky(const std::vector<double>& a, std::size_t n) {
  std::vector<double> l(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double s = a[i * n + j];
      for (std::size_t k = 0; k < j; ++k) s -= l[i * n + k] * l[j * n + k];
      if (i == j) {
        if (!(s > 0.0)) throw ValidationError("cholesky: matrix is not positive definite");
        l[i * n + i] = std::sqrt(s);
      } else {
        l[i * n + j] = s / l[j * n + j];
      }
    }
  }
  return l;
}

PairedSample sample_paired(const PairedDistributionSpec& spec, std::size_t m) {
  spec.clip_side.validate("clip side");
  spec.vgg_side.validate("vgg side");
  if (m == 0) throw ValidationError("sample_paired: m must be >= 1");
  const std::size_t dc = spec.clip_side.dim(), dv = spec.vgg_side.dim();
  std::vector<std::vector<double>> chol_c, chol_v;
  for (const auto& c : spec.clip_side.components) chol_c.push_back(cholesky(c.covariance, dc));
  for (const auto& c : spec.vgg_side.components) chol_v.push_back(cholesky(c.covariance, dv));
  const bool same_k = spec.clip_side.components.size() == spec.vgg_side.components.size();

  PairedSample out;
  out.clip = FeatureSet(FeatureDomain::clip_like, dc, Provenance::synthetic_pair);
  out.vgg = FeatureSet(FeatureDomain::vgg_like, dv, Provenance::synthetic_pair);
  out.clip.vectors.reserve(m * dc);
  out.vgg.vectors.reserve(m * dv);
  CounterRng clip_rng(spec.seed, "paired/clip");
  CounterRng vgg_rng(spec.seed, "paired/vgg");
  const std::size_t dz = std::max(dc, dv);
  std::vector<double> z(dz), zv(dz);
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t kc = draw_component(spec.clip_side, clip_rng);
    for (auto& v : z) v = clip_rng.normal();
    push_through(spec.clip_side.components[kc], chol_c[kc], z, out.clip.vectors);
    out.labels.push_back(kc);
    if (spec.pairing == Pairing::index) {
      const std::size_t kv = same_k ? kc : draw_component(spec.vgg_side, vgg_rng);
      push_through(spec.vgg_side.components[kv], chol_v[kv], z, out.vgg.vectors);
    } else {
      const std::size_t kv = draw_component(spec.vgg_side, vgg_rng);
      for (auto& v : zv) v = vgg_rng.normal();
      push_through(spec.vgg_side.components[kv], chol_v[kv], zv, out.vgg.vectors);
    }
  }
  if (spec.pairing == Pairing::nearest) {
    auto rank_order = [m](const FeatureSet& f) {
      std::vector<std::size_t> idx(m);
      std::iota(idx.begin(), idx.end(), 0);
      std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return f.row(a)[0] < f.row(b)[0]; });
      return idx;
    };
    const auto order_c = rank_order(out.clip);
    const auto order_v = rank_order(out.vgg);
    FeatureSet paired_vgg(FeatureDomain::vgg_like, dv, Provenance::synthetic_pair);
    paired_vgg.vectors.resize(m * dv);
    for (std::size_t r = 0; r < m; ++r) {
      const auto src = out.vgg.row(order_v[r]);
      std::copy(src.begin(), src.end(), paired_vgg.vectors.begin() + order_c[r] * dv);
    }
    out.vgg = std::move(paired_vgg);
  }
  return out;
}

}  // namespace subflow
