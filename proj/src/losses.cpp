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

#include "subflow/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "subflow/adam.hpp"
#include "subflow/error.hpp"
#include "subflow/rng.hpp"
#include "subflow/textures.hpp"

namespace subflow {

namespace {

template <class Real>
void check_same_taps(const Taps<Real>& a, const Taps<Real>& b, const char* who) {
  if (a.empty() || a.size() != b.size()) throw ValidationError(std::string(who) + ": tap lists differ in length");
  for (std::size_t t = 0; t < a.size(); ++t) {
    if (a[t].shape() != b[t].shape()) {
      throw ValidationError(std::string(who) + ": resolution mismatch at tap " + std::to_string(t) + " (" +
                            shape_string(a[t].shape()) + " vs " + shape_string(b[t].shape()) + ")");
    }
  }
}

template <class Real>
BasicTensor<Real> constant_row(const std::vector<float>& v) {
  return BasicTensor<Real>::from({1, v.size()}, std::vector<Real>(v.begin(), v.end()));
}

template <class Real>
void check_finite(const BasicTensor<Real>& t, const char* part) {
  for (Real v : t.data())
    if (!std::isfinite(v)) throw NumericError(std::string("total_stylized_loss: non-finite ") + part + " term");
}

Taps<float> image_taps(const Image& img, const PseudoVgg& net) { return net.taps(image_to_tensor(img)); }

TapStats tap_stats_of(const PseudoVgg& net, const Image& img) {
  NoGradGuard guard;
  TapStats out;
  for (const auto& t : image_taps(img, net)) {
    const auto m = channel_mean(t), s = channel_std(t);
    out.mean.emplace_back(m.data().begin(), m.data().end());
    out.std.emplace_back(s.data().begin(), s.data().end());
  }
  return out;
}

StyleStats tap_style(const TapStats& stats, std::size_t tap) {
  StyleStats s;
  s.mu = stats.mean[tap];
  s.sigma = stats.std[tap];
  for (auto& v : s.sigma) v = std::max(v, kEpsilonStd);
  return s;
}

ConvSpec conv(std::size_t in, std::size_t out, std::size_t stride, PadMode mode) {
  ConvSpec s;
  s.in_channels = in;
  s.out_channels = out;
  s.kernel = 3;
  s.stride = stride;
  s.pad = 1;
  s.pad_mode = mode;
  return s;
}

}  // namespace

void LossWeights::validate() const {
  const std::pair<const char*, double> fields[] = {
      {"lambda_style", lambda_style}, {"lambda_obs", lambda_obs}, {"lambda_flow", lambda_flow}, {"suppression", suppression}};
  for (const auto& [name, v] : fields) {
    if (!std::isfinite(v) || v < 0.0) throw ValidationError(std::string("loss weights: ") + name + " must be finite and >= 0");
  }
}

template <class Real>
BasicTensor<Real> content_loss(const Taps<Real>& a, const Taps<Real>& b) {
  check_same_taps(a, b, "content_loss");
  return mse(a.back(), b.back());
}

template <class Real>
BasicTensor<Real> style_loss(const Taps<Real>& f, const TapStats& reference) {
  if (reference.mean.size() != f.size() || reference.std.size() != f.size()) {
    throw ValidationError("style_loss: reference has " + std::to_string(reference.mean.size()) + " taps, image has " +
                          std::to_string(f.size()));
  }
  BasicTensor<Real> total;
  for (std::size_t t = 0; t < f.size(); ++t) {
    if (f[t].dim(0) != 1 || reference.mean[t].size() != f[t].dim(1) || reference.std[t].size() != f[t].dim(1)) {
      throw ValidationError("style_loss: channel mismatch at tap " + std::to_string(t));
    }
    const auto term = add(mse(channel_mean(f[t]), constant_row<Real>(reference.mean[t])),
                          mse(channel_std(f[t]), constant_row<Real>(reference.std[t])));
    total = total.defined() ? add(total, term) : term;
  }
  return total;
}

template <class Real>
BasicTensor<Real> observation_loss(const Taps<Real>& g, const Taps<Real>& f) {
  check_same_taps(g, f, "observation_loss");
  BasicTensor<Real> total;
  for (std::size_t t = 0; t < g.size(); ++t) {
    const auto term = mse(g[t], f[t]);
    total = total.defined() ? add(total, term) : term;
  }
  return total;
}

double content_loss(const Image& a, const Image& b, const PseudoVgg& net) {
  NoGradGuard guard;
  return content_loss<float>(image_taps(a, net), image_taps(b, net)).item();
}

double style_loss(const Image& img, const TapStats& reference, const PseudoVgg& net) {
  NoGradGuard guard;
  return style_loss<float>(image_taps(img, net), reference).item();
}

double observation_loss(const Image& g, const Image& f, const PseudoVgg& net) {
  NoGradGuard guard;
  return observation_loss<float>(image_taps(g, net), image_taps(f, net)).item();
}

template <class Real>
DiscriminatorT<Real>::DiscriminatorT(std::uint64_t seed) {
  CounterRng rng(seed, "discriminator");
  convs_.emplace_back(conv(3, 16, 2, PadMode::zeros), rng);
  convs_.emplace_back(conv(16, 16, 2, PadMode::zeros), rng);
  convs_.emplace_back(conv(16, 16, 1, PadMode::zeros), rng);
  DenseNetSpec head;
  head.layer_widths = {16, 1};
  head.output_activation = Activation::sigmoid;
  head.seed = derive_seed(seed, "discriminator/head");
  head_ = DenseNet<Real>(head);
}

template <class Real>
std::vector<BasicTensor<Real>> DiscriminatorT<Real>::forward(const BasicTensor<Real>& image) const {
  if (image.rank() != 4 || image.dim(0) != 1 || image.dim(1) != 3) {
    throw ValidationError("discriminator: expected a [1,3,H,W] image, got " + shape_string(image.shape()));
  }
  std::vector<BasicTensor<Real>> out;
  auto x = image;
  for (std::size_t s = 0; s < kDiscriminatorScales; ++s) {
    if (s > 0) x = avg_pool2(x);
    auto h = x;
    for (const auto& c : convs_) h = leaky_relu(c.forward(h), Real(0.2));
    out.push_back(head_.forward(channel_mean(h)));
  }
  return out;
}

template <class Real>
std::vector<BasicTensor<Real>> DiscriminatorT<Real>::parameters() const {
  std::vector<BasicTensor<Real>> out;
  for (const auto& c : convs_)
    for (const auto& p : c.parameters()) out.push_back(p);
  for (const auto& p : head_.parameters()) out.push_back(p);
  return out;
}

template <class Real>
SuppressionTerms<Real> suppression_terms(const std::vector<BasicTensor<Real>>& eta_g,
                                         const std::vector<BasicTensor<Real>>& eta_f) {
  if (eta_g.empty() || eta_g.size() != eta_f.size()) throw ValidationError("suppression: scale counts differ");
  const Real lo = Real(kProbabilityClamp), hi = Real(1) - Real(kProbabilityClamp);
  BasicTensor<Real> disc, gen;
  for (std::size_t s = 0; s < eta_g.size(); ++s) {
    const auto one_minus_f = add_scalar(scale(eta_f[s], Real(-1)), Real(1));
    const auto d = add(sum(log_clamped(eta_g[s], lo, hi)), sum(log_clamped(one_minus_f, lo, hi)));
    const auto g = sum(log_clamped(eta_f[s], lo, hi));
    disc = disc.defined() ? add(disc, d) : d;
    gen = gen.defined() ? add(gen, g) : g;
  }
  const Real k = Real(-1) / static_cast<Real>(eta_g.size());
  return {scale(disc, k), scale(gen, k)};
}

template <class Real>
SuppressionTerms<Real> suppression_loss(const BasicTensor<Real>& i_g, const BasicTensor<Real>& i_f,
                                        const DiscriminatorT<Real>& disc) {
  if (i_g.shape() != i_f.shape()) throw ValidationError("suppression_loss: resolution mismatch");
  return suppression_terms(disc.forward(i_g), disc.forward(i_f));
}

template <class Real>
BasicTensor<Real> total_stylized_loss(const BasicTensor<Real>& content, const BasicTensor<Real>& style,
                                      const BasicTensor<Real>& obs, const BasicTensor<Real>& flow,
                                      const LossWeights& w) {
  w.validate();
  check_finite(content, "content");
  check_finite(style, "style");
  check_finite(obs, "obs");
  check_finite(flow, "flow");
  auto total = add(content, scale(style, static_cast<Real>(w.lambda_style)));
  total = add(total, scale(obs, static_cast<Real>(w.lambda_obs)));
  return add(total, scale(flow, static_cast<Real>(w.lambda_flow)));
}

double total_stylized_loss(const LossParts& parts, const LossWeights& w) {
  w.validate();
  const std::pair<const char*, double> named[] = {
      {"content", parts.content}, {"style", parts.style}, {"obs", parts.obs}, {"flow", parts.flow}};
  for (const auto& [name, v] : named) {
    if (!std::isfinite(v)) throw NumericError(std::string("total_stylized_loss: non-finite ") + name + " term");
  }
  return parts.content + w.lambda_style * parts.style + w.lambda_obs * parts.obs + w.lambda_flow * parts.flow;
}

template <class Real>
Decoder2dT<Real>::Decoder2dT(std::uint64_t seed, std::size_t width) {
  if (width < 2) throw ValidationError("decoder2d: width must be >= 2");
  CounterRng rng(seed, "decoder2d");
  convs_.emplace_back(conv(kVggWidths[kGeneratorTap], width, 1, PadMode::replicate), rng);
  convs_.emplace_back(conv(width, width / 2, 1, PadMode::replicate), rng);
  convs_.emplace_back(conv(width / 2, 3, 1, PadMode::replicate), rng);
}

template <class Real>
BasicTensor<Real> Decoder2dT<Real>::forward(const BasicTensor<Real>& features) const {
  auto x = relu(convs_[0].forward(features));
  x = upsample2(x);
  x = relu(convs_[1].forward(x));
  return sigmoid(convs_[2].forward(x));
}

template <class Real>
std::vector<BasicTensor<Real>> Decoder2dT<Real>::parameters() const {
  std::vector<BasicTensor<Real>> out;
  for (const auto& c : convs_)
    for (const auto& p : c.parameters()) out.push_back(p);
  return out;
}

Decoder2d pretrain_decoder2d(const PseudoVgg& net, const Decoder2dConfig& cfg, std::vector<float>* losses) {
  if (cfg.corpus_size == 0 || cfg.batch_size == 0) throw ValidationError("decoder2d: corpus and batch must be non-empty");
  const auto corpus = texture_corpus(cfg.corpus_size, cfg.image_size, derive_seed(cfg.seed, "decoder2d/corpus"));
  std::vector<Tensor> inputs, features;
  {
    NoGradGuard guard;
    for (const auto& img : corpus) {
      inputs.push_back(image_to_tensor(img));
      features.push_back(net.taps(inputs.back())[kGeneratorTap].detach());
    }
  }
  Decoder2d dec(derive_seed(cfg.seed, "decoder2d/init"), cfg.width);
  Adam opt(dec.parameters(), cfg.learning_rate);
  CounterRng rng(cfg.seed, "decoder2d/batches");
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    opt.zero_grad();
    Tensor loss;
    for (std::size_t b = 0; b < cfg.batch_size; ++b) {
      const std::size_t i = rng.below(corpus.size());
      const auto term = mse(dec.forward(features[i]), inputs[i]);
      loss = loss.defined() ? add(loss, term) : term;
    }
    loss = scale(loss, 1.0f / static_cast<float>(cfg.batch_size));
    backward(loss);
    opt.step();
    if (losses) losses->push_back(loss.item());
  }

  std::vector<TapStats> stats;
  for (const auto& img : corpus) stats.push_back(tap_stats_of(net, img));
  for (std::size_t step = 0; step < cfg.style_steps; ++step) {
    const std::size_t ci = rng.below(corpus.size()), si = rng.below(corpus.size());
    const auto target = adain_map(features[ci], tap_style(stats[si], kGeneratorTap));
    opt.zero_grad();
    const auto taps = net.taps(dec.forward(target));
    const auto loss = add(mse(taps[kGeneratorTap], target), scale(style_loss<float>(taps, stats[si]), cfg.style_weight));
    backward(loss);
    opt.step();
    if (losses) losses->push_back(loss.item());
  }
  dec.trained = true;
  return dec;
}

Image generator_2d(const Image& content, const Image& style, const PseudoVgg& net, const Decoder2d& decoder) {
  if (!decoder.trained) throw ValidationError("generator_2d: 2D decoder is not trained");
  NoGradGuard guard;
  const auto content_feat = net.taps(image_to_tensor(content))[kGeneratorTap];
  return tensor_to_image(decoder.forward(adain_map(content_feat, tap_style(tap_stats_of(net, style), kGeneratorTap))));
}

#define SUBFLOW_INSTANTIATE_LOSSES(R)                                                                      \
  template BasicTensor<R> content_loss<R>(const Taps<R>&, const Taps<R>&);                                \
  template BasicTensor<R> style_loss<R>(const Taps<R>&, const TapStats&);                                 \
  template BasicTensor<R> observation_loss<R>(const Taps<R>&, const Taps<R>&);                            \
  template SuppressionTerms<R> suppression_terms<R>(const std::vector<BasicTensor<R>>&,                   \
                                                    const std::vector<BasicTensor<R>>&);                  \
  template SuppressionTerms<R> suppression_loss<R>(const BasicTensor<R>&, const BasicTensor<R>&,          \
                                                   const DiscriminatorT<R>&);                             \
  template BasicTensor<R> total_stylized_loss<R>(const BasicTensor<R>&, const BasicTensor<R>&,            \
                                                 const BasicTensor<R>&, const BasicTensor<R>&,            \
                                                 const LossWeights&);                                     \
  template class DiscriminatorT<R>;                                                                       \
  template class Decoder2dT<R>;

SUBFLOW_INSTANTIATE_LOSSES(float)
SUBFLOW_INSTANTIATE_LOSSES(double)

}  // namespace subflow
