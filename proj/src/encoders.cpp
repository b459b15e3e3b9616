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

#include "subflow/encoders.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <sstream>

#include "subflow/error.hpp"
#include "subflow/rng.hpp"

namespace subflow {

namespace {

void check_image(const Image& img, const char* who) {
  if (img.channels != 3) throw ValidationError(std::string(who) + ": expected an RGB image");
  if (img.width < 8 || img.height < 8) throw ValidationError(std::string(who) + ": image must be at least 8x8");
  for (float v : img.data)
    if (!std::isfinite(v)) throw ValidationError(std::string(who) + ": image contains non-finite pixels");
}

template <class Real>
BasicTensor<Real> normalise_input(const BasicTensor<Real>& images) {
  return scale(add_scalar(images, Real(-0.5)), Real(2));
}

std::mutex table_mutex;

// Rescales a freshly initialised layer from Glorot to He bounds so that
// activations keep their magnitude through stacked ReLUs.
template <class Real>
void apply_relu_gain(Conv2dLayer<Real>& layer) {
  const auto& s = layer.spec();
  const double k2 = static_cast<double>(s.kernel * s.kernel);
  const double fan_in = s.in_channels * k2, fan_out = s.out_channels * k2;
  const double gain = std::sqrt((fan_in + fan_out) / fan_in);
  for (auto& w : layer.parameters()[0].mutable_data()) w = static_cast<Real>(w * gain);
}

}  // namespace

double softplus_inverse(double y) {
  if (y > 20.0) return y;
  return std::log(std::expm1(y));
}

template <class Real>
PseudoVggT<Real>::PseudoVggT(std::uint64_t seed, bool trainable) {
  CounterRng rng(seed, "encoder/vgg");
  std::size_t in = 3;
  for (std::size_t b = 0; b < kVggWidths.size(); ++b) {
    ConvSpec spec;
    spec.in_channels = in;
    spec.out_channels = kVggWidths[b];
    spec.kernel = b == 0 ? 1 : 3;
    spec.pad = b == 0 ? 0 : 1;
    spec.pad_mode = PadMode::replicate;
    blocks_.emplace_back(spec, rng);
    apply_relu_gain(blocks_.back());
    blocks_.back().set_trainable(trainable);
    in = kVggWidths[b];
  }
}

template <class Real>
std::vector<BasicTensor<Real>> PseudoVggT<Real>::taps(const BasicTensor<Real>& images) const {
  if (images.rank() != 4 || images.dim(1) != 3) {
    throw ValidationError("pseudo-vgg: expected [N,3,H,W] images, got " + shape_string(images.shape()));
  }
  if (images.dim(2) < 8 || images.dim(3) < 8) throw ValidationError("pseudo-vgg: images must be at least 8x8");
  std::vector<BasicTensor<Real>> out;
  auto x = normalise_input(images);
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    if (b > 0) x = avg_pool2(x);
    x = relu(blocks_[b].forward(x));
    out.push_back(x);
  }
  return out;
}

template <class Real>
std::vector<BasicTensor<Real>> PseudoVggT<Real>::parameters() const {
  std::vector<BasicTensor<Real>> out;
  for (const auto& b : blocks_)
    for (const auto& p : b.parameters()) out.push_back(p);
  return out;
}

template class PseudoVggT<float>;
template class PseudoVggT<double>;

VggEncoder::VggEncoder(const EncoderConfig& config) : net_(config.seed), style_dim_(config.style_dim) {
  if (style_dim_ == 0 || style_dim_ > kVggWidths.back()) {
    throw ValidationError("vgg encoder: style_dim must be in [1, " + std::to_string(kVggWidths.back()) + "]");
  }
  transfer_tap_ = 0;
  while (kVggWidths[transfer_tap_] < style_dim_) ++transfer_tap_;
}

TapStats VggEncoder::tap_stats(const Image& img) const {
  check_image(img, "encode_vgg_like");
  NoGradGuard guard;
  const auto taps = net_.taps(image_to_tensor(img));
  TapStats stats;
  for (const auto& t : taps) {
    const auto m = channel_mean(t), s = channel_std(t);
    stats.mean.emplace_back(m.data().begin(), m.data().end());
    stats.std.emplace_back(s.data().begin(), s.data().end());
  }
  return stats;
}

std::vector<float> VggEncoder::style_vector(const Image& img) const {
  const auto stats = tap_stats(img);
  std::vector<float> v(2 * style_dim_);
  for (std::size_t c = 0; c < style_dim_; ++c) {
    v[c] = stats.mean[transfer_tap_][c];
    v[style_dim_ + c] = static_cast<float>(softplus_inverse(std::max(1e-3, static_cast<double>(stats.std[transfer_tap_][c]))));
  }
  return v;
}

FeatureSet VggEncoder::encode(const std::vector<Image>& images) const {
  FeatureSet f(FeatureDomain::vgg_like, vector_dim());
  for (const auto& img : images) f.append(style_vector(img));
  return f;
}

ClipEncoder::ClipEncoder(const EncoderConfig& config) : dim_(config.clip_dim) {
  if (dim_ == 0) throw ValidationError("clip encoder: clip_dim must be >= 1");
  CounterRng rng(config.seed, "encoder/clip");
  const std::array<std::size_t, 4> widths{3, 16, 32, 32};
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    ConvSpec spec;
    spec.in_channels = widths[i];
    spec.out_channels = widths[i + 1];
    spec.kernel = 3;
    spec.pad = 1;
    spec.pad_mode = PadMode::replicate;
    convs_.emplace_back(spec, rng);
    apply_relu_gain(convs_.back());
    convs_.back().set_trainable(false);
  }
  const std::size_t pooled_width = 2 * widths.back();
  projection_.resize(dim_ * pooled_width);
  const double s = 1.0 / std::sqrt(static_cast<double>(pooled_width));
  for (auto& v : projection_) v = static_cast<float>(s * rng.normal());
  baseline_ = pooled(Image(16, 16, 3, 0.5f));
}

std::vector<float> ClipEncoder::pooled(const Image& img) const {
  NoGradGuard guard;
  auto x = scale(add_scalar(image_to_tensor(img), -0.5f), 2.0f);
  for (std::size_t i = 0; i < convs_.size(); ++i) {
    if (i > 0) x = avg_pool2(x);
    x = relu(convs_[i].forward(x));
  }
  const auto m = channel_mean(x), s = channel_std(x);
  std::vector<float> out(m.data().begin(), m.data().end());
  out.insert(out.end(), s.data().begin(), s.data().end());
  return out;
}

std::vector<float> ClipEncoder::encode_one(const Image& img) const {
  check_image(img, "encode_clip_like");
  const auto p = pooled(img);
  std::vector<float> out(dim_, 0.0f);
  for (std::size_t i = 0; i < dim_; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < p.size(); ++j) acc += static_cast<double>(projection_[i * p.size() + j]) * (p[j] - baseline_[j]);
    out[i] = static_cast<float>(acc);
  }
  return out;
}

FeatureSet ClipEncoder::encode(const std::vector<Image>& images) const {
  FeatureSet f(FeatureDomain::clip_like, dim_);
  for (const auto& img : images) f.append(encode_one(img));
  return f;
}

std::vector<std::string> tokenize(const std::string& text) {
  std::istringstream in(text);
  std::vector<std::string> out;
  for (std::string tok; in >> tok;) out.push_back(tok);
  return out;
}

TextEncoder::TextEncoder(const ClipEncoder& clip, std::uint64_t seed, int image_size)
    : clip_(&clip), seed_(seed), image_size_(image_size), rows_(kTableRows), norms_(kTableRows, 0.0f) {}

std::size_t TextEncoder::row_for(const std::string& token) const { return fnv1a64(token) % kTableRows; }

TextureParams TextEncoder::prototype(std::size_t row) const {
  CounterRng rng(seed_, "concept/" + std::to_string(row));
  auto p = random_texture(rng);
  p.noise = 0.0;
  return p;
}

const std::vector<float>& TextEncoder::table_row(std::size_t row) const {
  std::lock_guard lock(table_mutex);
  if (rows_[row].empty()) {
    auto v = clip_->encode_one(render_texture(prototype(row), image_size_));
    double n = 0.0;
    for (float x : v) n += static_cast<double>(x) * x;
    n = std::sqrt(n);
    if (n > 0.0)
      for (auto& x : v) x = static_cast<float>(x / n);
    norms_[row] = static_cast<float>(n);
    rows_[row] = std::move(v);
  }
  return rows_[row];
}

FeatureSet TextEncoder::encode(const std::vector<std::string>& tokens) const {
  if (tokens.empty()) throw ValidationError("encode_text: token list is empty");
  const std::size_t d = clip_->dim();
  std::vector<double> acc(d, 0.0);
  double norm_sum = 0.0;
  for (const auto& tok : tokens) {
    const std::size_t r = row_for(tok);
    const auto& row = table_row(r);
    for (std::size_t i = 0; i < d; ++i) acc[i] += row[i];
    norm_sum += norms_[r];
  }
  double n = 0.0;
  for (double v : acc) n += v * v;
  n = std::sqrt(n);
  const double target = norm_sum / static_cast<double>(tokens.size());
  FeatureSet f(FeatureDomain::clip_like, d);
  f.vectors.resize(d);
  for (std::size_t i = 0; i < d; ++i) f.vectors[i] = n > 0.0 ? static_cast<float>(acc[i] / n * target) : 0.0f;
  return f;
}

const std::vector<std::string>& concept_words() {
  static const std::vector<std::string> words{
      "fire",  "ice",    "forest", "ocean",  "sunset", "desert", "night", "candy",    "marble", "moss",
      "lava",  "storm",  "rust",   "gold",   "coral",  "neon",   "ink",   "autumn",   "snow",   "jade",
      "copper", "sky",   "cherry", "meadow", "dune",   "glacier", "ember", "lavender", "slate",  "amber"};
  return words;
}

ConceptPair concept_pair(const TextEncoder& text, std::uint64_t seed, std::size_t index) {
  const auto& words = concept_words();
  CounterRng rng(seed, "concept-pair/" + std::to_string(index));
  ConceptPair pair;
  pair.caption = words[rng.below(words.size())];
  auto params = perturb_texture(text.prototype(text.row_for(pair.caption)), rng, 0.3);
  params.noise = 0.02;
  pair.image = render_texture(params, 32);
  return pair;
}

}  // namespace subflow
