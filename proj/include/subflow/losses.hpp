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
#include <vector>

#include "subflow/encoders.hpp"
#include "subflow/image.hpp"
#include "subflow/nn.hpp"
#include "subflow/tensor.hpp"
#include "subflow/transfer.hpp"

namespace subflow {

struct LossWeights {
  double lambda_style = 10.0;
  double lambda_obs = 1.0;
  double lambda_flow = 1.0;
  // Weight of the generator-side suppression signal; 0 disables the
  // discriminator entirely.
  double suppression = 0.1;

  void validate() const;
};

template <class Real>
using Taps = std::vector<BasicTensor<Real>>;

// Mean squared difference of the deepest tap.
template <class Real>
BasicTensor<Real> content_loss(const Taps<Real>& a, const Taps<Real>& b);

// Sum over taps of the mean squared gaps of channel means and stds.
template <class Real>
BasicTensor<Real> style_loss(const Taps<Real>& f, const TapStats& reference);

// Sum over taps of the mean squared feature difference.
template <class Real>
BasicTensor<Real> observation_loss(const Taps<Real>& g, const Taps<Real>& f);

double content_loss(const Image& a, const Image& b, const PseudoVgg& net);
double style_loss(const Image& img, const TapStats& reference, const PseudoVgg& net);
double observation_loss(const Image& g, const Image& f, const PseudoVgg& net);

inline constexpr std::size_t kDiscriminatorScales = 3;
inline constexpr float kProbabilityClamp = 1e-7f;

// Shared conv stack (3->16 s2, 16->16 s2, 16->16 s1, leaky ReLU), spatial
// mean, linear head and sigmoid, applied at three 2x-downsampled scales.
template <class Real>
class DiscriminatorT {
 public:
  DiscriminatorT() = default;
  explicit DiscriminatorT(std::uint64_t seed);

  // One [1, 1] probability per scale.
  std::vector<BasicTensor<Real>> forward(const BasicTensor<Real>& image) const;
  std::vector<BasicTensor<Real>> parameters() const;

 private:
  std::vector<Conv2dLayer<Real>> convs_;
  DenseNet<Real> head_;
};

using Discriminator = DiscriminatorT<float>;

template <class Real>
struct SuppressionTerms {
  BasicTensor<Real> disc_loss;
  BasicTensor<Real> gen_signal;
};

template <class Real>
SuppressionTerms<Real> suppression_terms(const std::vector<BasicTensor<Real>>& eta_g,
                                         const std::vector<BasicTensor<Real>>& eta_f);

template <class Real>
SuppressionTerms<Real> suppression_loss(const BasicTensor<Real>& i_g, const BasicTensor<Real>& i_f,
                                        const DiscriminatorT<Real>& disc);

template <class Real>
BasicTensor<Real> total_stylized_loss(const BasicTensor<Real>& content, const BasicTensor<Real>& style,
                                      const BasicTensor<Real>& obs, const BasicTensor<Real>& flow,
                                      const LossWeights& w);

struct LossParts {
  double content = 0.0;
  double style = 0.0;
  double obs = 0.0;
  double flow = 0.0;
};

double total_stylized_loss(const LossParts& parts, const LossWeights& w);

inline constexpr std::size_t kGeneratorTap = 1;

// Image decoder for the 2D generator: tap-1 features (16 ch, half
// resolution) -> conv width, upsample, conv width/2, conv 3, sigmoid.
template <class Real>
class Decoder2dT {
 public:
  Decoder2dT() = default;
  explicit Decoder2dT(std::uint64_t seed, std::size_t width = 16);

  BasicTensor<Real> forward(const BasicTensor<Real>& features) const;
  std::vector<BasicTensor<Real>> parameters() const;
  bool trained = false;

 private:
  std::vector<Conv2dLayer<Real>> convs_;
};

using Decoder2d = Decoder2dT<float>;

struct Decoder2dConfig {
  std::size_t corpus_size = 200;
  std::size_t steps = 2000;
  std::size_t batch_size = 4;
  std::size_t width = 16;
  int image_size = 32;
  float learning_rate = 2e-3f;
  // Second stage on random content/style pairs: tap-1 match to the AdaIN
  // target plus style statistics at every tap.
  std::size_t style_steps = 3000;
  float style_weight = 10.0f;
  std::uint64_t seed = 1;
};

// Reconstruction pretraining on a procedural texture corpus, then
// style-transfer fine-tuning on pairs drawn from the same corpus.
Decoder2d pretrain_decoder2d(const PseudoVgg& net, const Decoder2dConfig& cfg = {},
                             std::vector<float>* losses = nullptr);

// Encode content, AdaIN toward the style image's tap statistics, decode.
Image generator_2d(const Image& content, const Image& style, const PseudoVgg& net, const Decoder2d& decoder);

extern template class DiscriminatorT<float>;
extern template class DiscriminatorT<double>;
extern template class Decoder2dT<float>;
extern template class Decoder2dT<double>;

}  // namespace subflow
